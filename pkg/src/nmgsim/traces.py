#!/usr/bin/env python3

"""
Trace and event files.

`traces.csv` holds one row per trace record: `t`, then for every IBR (in id
order) the columns `<ibr>.P`, `.Q`, `.f`, `.V`, `.delta`, `.Omega`, `.e`,
`.local_ok`, `.stage2_ok`, then `<breaker>.latched` for every breaker (in id
order). Units are W, VAr, Hz, V, degrees, rad/s and V; flags are 0/1.
"""

from __future__ import annotations as _annotations

import csv as _csv
import json as _json
import logging as _logging

from csv import Dialect as _Dialect, QUOTE_MINIMAL as _QUOTE_MINIMAL
from pathlib import Path as _Path

import numpy as _np

from .errors import TraceFormatError

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from os import PathLike
    from types import TracebackType
    from typing import TextIO

    from .engine import Event, TraceRecord


_logger = _logging.getLogger(__name__)

IBR_SIGNALS = ('P', 'Q', 'f', 'V', 'delta', 'Omega', 'e', 'local_ok', 'stage2_ok')
NUMBER_FORMAT = '%.12g'


class TraceDialect(_Dialect):
    delimiter = ','
    doublequote = True
    escapechar = None
    lineterminator = '\n'
    quotechar = '"'
    quoting = _QUOTE_MINIMAL
    skipinitialspace = False
    strict = True


def trace_columns(ibrs: Sequence[str], breakers: Sequence[str]) -> list[str]:
    return [
        't',
        *(f'{ibr}.{signal}' for ibr in ibrs for signal in IBR_SIGNALS),
        *(f'{breaker}.latched' for breaker in breakers),
    ]


def _number(value: float) -> str:
    return NUMBER_FORMAT % value


class TraceWriter:
    """
    CSV sink for trace records with a fixed column order.

    The header is written on construction; rows that coincide with an event
    are flushed immediately.
    """

    def __init__(
        self,
        path: PathLike[str] | str,
        ibrs: Sequence[str],
        breakers: Sequence[str],
    ) -> None:
        self.path = _Path(path)
        self.ibrs = tuple(ibrs)
        self.breakers = tuple(breakers)
        self.columns = trace_columns(self.ibrs, self.breakers)
        self.rows = 0
        self._file: TextIO = self.path.open('w', encoding='utf-8', newline='')
        self._writer = _csv.writer(self._file, dialect=TraceDialect)
        self._writer.writerow(self.columns)

    def write(self, record: TraceRecord, *, flush: bool = False) -> None:
        row = [_number(record.t)]
        for ibr in self.ibrs:
            trace = record.ibrs[ibr]
            row += [
                _number(trace.p),
                _number(trace.q),
                _number(trace.f),
                _number(trace.v),
                _number(trace.delta_deg),
                _number(trace.omega_sec),
                _number(trace.e_sec),
                str(int(trace.local_ok)),
                str(int(trace.stage2_ok)),
            ]
        row += [str(int(record.breakers[breaker])) for breaker in self.breakers]
        self._writer.writerow(row)
        self.rows += 1
        if flush:
            self._file.flush()

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> TraceWriter:
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_value: BaseException | None,
        traceback: TracebackType | None,
    ) -> None:
        self.close()


def write_traces(
    records: Iterable[TraceRecord],
    path: PathLike[str] | str,
    ibrs: Sequence[str],
    breakers: Sequence[str],
    event_times: Iterable[float] = (),
) -> _Path:
    event_times = set(event_times)
    with TraceWriter(path, ibrs, breakers) as writer:
        for record in records:
            writer.write(record, flush=record.t in event_times)
    _logger.info("wrote %d trace rows to %s", writer.rows, writer.path)
    return writer.path


def write_events(events: Iterable[Event], path: PathLike[str] | str) -> _Path:
    path = _Path(path)
    with path.open('w', encoding='utf-8', newline='') as f:
        writer = _csv.writer(f, dialect=TraceDialect)
        writer.writerow(('t', 'kind', 'payload'))
        for event in events:
            writer.writerow((_number(event.t), event.kind.value, _json.dumps(event.payload)))
    return path


def read_traces(path: PathLike[str] | str) -> tuple[list[str], _np.ndarray]:
    """Header and data of a trace file; the data has one row per record."""

    path = _Path(path)
    with path.open(encoding='utf-8', newline='') as f:
        reader = _csv.reader(f, dialect=TraceDialect)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{str(path)!r} is empty") from None
        except _csv.Error as exc:
            raise TraceFormatError(f"{str(path)!r}: {exc}") from None
        if not header or header[0] != 't':
            raise TraceFormatError(f"{str(path)!r}: first column must be 't'")

        rows = []
        try:
            for row in reader:
                rows.append(row)
        except _csv.Error as exc:
            raise TraceFormatError(f"{str(path)!r} line {reader.line_num}: {exc}") from None

    values = []
    for line, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise TraceFormatError(
                f"{str(path)!r} line {line}: expected {len(header)} fields, got {len(row)}"
            )
        try:
            values.append([float(value) for value in row])
        except ValueError as exc:
            raise TraceFormatError(f"{str(path)!r} line {line}: {exc}") from None

    data = _np.array(values, dtype=float).reshape(len(values), len(header))
    return header, data


def trace_ibrs(header: Sequence[str]) -> list[str]:
    """IBR ids present in a trace header, in column order."""
    return [column[: -len('.P')] for column in header if column.endswith('.P')]


def require_columns(header: Sequence[str]) -> None:
    present = set(header)
    for ibr in trace_ibrs(header):
        for signal in IBR_SIGNALS:
            if f'{ibr}.{signal}' not in present:
                raise TraceFormatError(f"missing column {ibr + '.' + signal!r}")
