#!/usr/bin/env python3

"""Run metrics computed from trace records and the event log."""

from __future__ import annotations as _annotations

import math as _math

from dataclasses import asdict as _asdict, dataclass as _dataclass

import numpy as _np

from .engine import EventKind

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from .controller import IbrParams
    from .engine import Event, TraceRecord


@_dataclass(frozen=True)
class RunSummary:
    closures: int
    first_closure: float | None
    last_closure: float | None
    same_step: bool
    final_max_freq_dev_hz: float
    p_spread: float
    q_ratio_spread: float
    max_voltage_dev: float
    settling_time: float | None

    def as_dict(self) -> dict[str, object]:
        return _asdict(self)


def _settling_time(
    records: Sequence[TraceRecord],
    ibrs: Sequence[str],
    f_star: _np.ndarray,
    since: float,
    freq_band_hz: float,
    power_band: float,
) -> float | None:
    after = [record for record in records if record.t >= since]
    if not after:
        return None
    p_final = _np.array([after[-1].ibrs[ibr].p for ibr in ibrs])
    p_scale = _np.maximum(_np.abs(p_final), 1.0)

    settled_from = None
    for record in after:
        f = _np.array([record.ibrs[ibr].f for ibr in ibrs])
        p = _np.array([record.ibrs[ibr].p for ibr in ibrs])
        inside = (
            _np.all(_np.abs(f - f_star) < freq_band_hz)
            and _np.all(_np.abs(p - p_final) / p_scale < power_band)
        )
        if not inside:
            settled_from = None
        elif settled_from is None:
            settled_from = record.t
    return None if settled_from is None else settled_from - since


def summarize(
    records: Sequence[TraceRecord],
    events: Iterable[Event],
    params: Mapping[str, IbrParams],
    *,
    freq_band_hz: float = 0.01,
    power_band: float = 0.02,
) -> RunSummary:
    """
    Summarize a run.

    Final-state metrics are taken from the last record and `params` (the
    setpoints in force at the end of the run). Settling time counts from the
    last closure until every frequency stays within `freq_band_hz` of its
    nominal value and every active power within `power_band` (relative) of
    its final value.
    """

    closure_times = [event.t for event in events if event.kind is EventKind.CLOSURE]
    first = min(closure_times, default=None)
    last = max(closure_times, default=None)

    if not records:
        return RunSummary(
            len(closure_times), first, last, len(set(closure_times)) == 1,
            _math.nan, _math.nan, _math.nan, _math.nan, None,
        )

    ibrs = sorted(records[-1].ibrs)
    final = records[-1].ibrs
    f_star = _np.array([params[ibr].omega_star / (2 * _math.pi) for ibr in ibrs])
    v_star = _np.array([params[ibr].v_star for ibr in ibrs])
    q_star = _np.array([params[ibr].q_star for ibr in ibrs])
    f = _np.array([final[ibr].f for ibr in ibrs])
    p = _np.array([final[ibr].p for ibr in ibrs])
    q = _np.array([final[ibr].q for ibr in ibrs])
    v = _np.array([final[ibr].v for ibr in ibrs])

    p_mean = p.mean()
    p_spread = float(_np.max(_np.abs(p - p_mean)) / abs(p_mean)) if p_mean else _math.nan
    q_ratio = _np.divide(q, q_star, out=_np.full_like(q, _math.nan), where=q_star != 0)

    return RunSummary(
        closures=len(closure_times),
        first_closure=first,
        last_closure=last,
        same_step=len(set(closure_times)) == 1,
        final_max_freq_dev_hz=float(_np.max(_np.abs(f - f_star))),
        p_spread=p_spread,
        q_ratio_spread=float(_np.nanmax(q_ratio) - _np.nanmin(q_ratio)) if q_star.any() else _math.nan,
        max_voltage_dev=float(_np.max(_np.abs(v - v_star) / v_star)),
        settling_time=(
            None if last is None
            else _settling_time(records, ibrs, f_star, last, freq_band_hz, power_band)
        ),
    )
