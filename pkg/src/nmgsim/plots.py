#!/usr/bin/env python3

"""
Static plots of a trace file.

One SVG per signal family (active power, frequency, reactive power, voltage,
phase), each with one line per IBR and a dashed marker wherever a breaker
latched closed.
"""

from __future__ import annotations as _annotations

import logging as _logging

from pathlib import Path as _Path
from typing import NamedTuple as _NamedTuple

import numpy as _np

from matplotlib.figure import Figure as _Figure

from .traces import read_traces, require_columns, trace_ibrs

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Sequence
    from os import PathLike


_logger = _logging.getLogger(__name__)


class SignalFamily(_NamedTuple):
    name: str
    signal: str
    label: str
    scale: float = 1.0


FAMILIES = (
    SignalFamily('active_power', 'P', "P (kW)", 1e-3),
    SignalFamily('frequency', 'f', "f (Hz)"),
    SignalFamily('reactive_power', 'Q', "Q (kVAr)", 1e-3),
    SignalFamily('voltage', 'V', "V (V)"),
    SignalFamily('phase', 'delta', "δ (deg)"),
)


def closure_times(header: Sequence[str], data: _np.ndarray) -> list[float]:
    """Times at which any `<breaker>.latched` column steps from 0 to 1."""

    t = data[:, 0]
    times = set()
    for k, column in enumerate(header):
        if not column.endswith('.latched') or len(t) == 0:
            continue
        latched = data[:, k] > 0.5
        rises = _np.flatnonzero(latched[1:] & ~latched[:-1]) + 1
        times.update(t[rises].tolist())
    return sorted(times)


def emit_plots(
    csv_path: PathLike[str] | str,
    out_dir: PathLike[str] | str,
) -> list[_Path]:
    header, data = read_traces(csv_path)
    require_columns(header)
    index = {column: k for k, column in enumerate(header)}
    ibrs = trace_ibrs(header)
    t = data[:, 0]
    markers = closure_times(header, data)

    out_dir = _Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    paths = []
    for family in FAMILIES:
        fig = _Figure(figsize=(8, 3.5), layout='constrained')
        ax = fig.add_subplot()
        for ibr in ibrs:
            ax.plot(t, data[:, index[f'{ibr}.{family.signal}']] * family.scale, label=ibr)
        for time in markers:
            ax.axvline(time, color='k', linestyle='--', linewidth=0.8, alpha=0.6)
        ax.set_xlabel("t (s)")
        ax.set_ylabel(family.label)
        ax.grid(True, alpha=0.3)
        if ibrs:
            ax.legend(loc='best', fontsize='small', ncols=min(len(ibrs), 4))

        path = out_dir / f'{family.name}.svg'
        fig.savefig(path, format='svg')
        paths.append(path)

    _logger.info("wrote %d plots to %s", len(paths), out_dir)
    return paths
