#!/usr/bin/env python3

"""
Distributed breaker-closure logic.

Three stages: each IBR checks its own frequency, voltage and phase deviation
(`local_sync_check`), then ANDs that with the flags received from its
communication neighbors (`stage2_check`), and every breaker's set-dominant
latch closes once all of its adjacent IBRs pass stage two (`latch_update`).
"""

from __future__ import annotations as _annotations

import logging as _logging
import math as _math

from dataclasses import dataclass as _dataclass, field as _field
from typing import NamedTuple as _NamedTuple

from .errors import TopologyError

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    from .topology import NmgTopology


_logger = _logging.getLogger(__name__)


class Ieee1547Limit(_NamedTuple):
    max_rating_kva: float
    freq_hz: float
    volt_frac: float
    phase_deg: float


# IEEE 1547-2018 synchronization parameter limits by aggregate DER rating
IEEE1547_LIMITS = (
    Ieee1547Limit(500.0, 0.3, 0.10, 20.0),
    Ieee1547Limit(1500.0, 0.2, 0.05, 15.0),
    Ieee1547Limit(_math.inf, 0.1, 0.03, 10.0),
)


def ieee1547_limits(rating_kva: float) -> Ieee1547Limit:
    if not rating_kva > 0:
        raise ValueError(f"rating must be positive, got {rating_kva!r}")
    for limit in IEEE1547_LIMITS:
        if rating_kva <= limit.max_rating_kva:
            return limit
    raise AssertionError("unreachable")


@_dataclass(frozen=True, slots=True)
class SyncCheckConfig:
    freq_tol: float = 0.01
    volt_tol: float = 0.01
    phase_tol: float = 0.1
    dwell: float = 0.0

    def __post_init__(self) -> None:
        for name in ('freq_tol', 'volt_tol', 'phase_tol'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.dwell >= 0:
            raise ValueError(f"dwell must not be negative, got {self.dwell!r}")

    @classmethod
    def from_ieee1547(cls, rating_kva: float, dwell: float = 0.0) -> SyncCheckConfig:
        limit = ieee1547_limits(rating_kva)
        return cls(limit.freq_hz, limit.volt_frac, limit.phase_deg, dwell)


def local_sync_check(config: SyncCheckConfig, d_f: float, d_v: float, phase_sum: float) -> bool:
    """`d_f` in Hz, `d_v` as a fraction of V*, `phase_sum` in degrees."""
    return abs(d_f) < config.freq_tol and abs(d_v) < config.volt_tol and phase_sum < config.phase_tol


def stage2_check(own: bool, neighbors: Iterable[bool]) -> bool:
    return own and all(neighbors)


@_dataclass
class SyncLatchState:
    local_ok: dict[str, bool] = _field(default_factory=dict)
    stage2_ok: dict[str, bool] = _field(default_factory=dict)
    latched: dict[str, bool] = _field(default_factory=dict)

    @classmethod
    def for_topology(cls, topology: NmgTopology) -> SyncLatchState:
        return cls(
            {ibr: False for ibr in topology.ibr_ids},
            {ibr: False for ibr in topology.ibr_ids},
            {breaker: False for breaker in topology.breaker_ids},
        )


def latch_update(state: SyncLatchState, breaker: str, adjacent: Iterable[bool]) -> bool:
    """Set the latch of `breaker` if every adjacent input is true; returns whether it just closed."""

    try:
        latched = state.latched[breaker]
    except KeyError:
        raise TopologyError(f"unknown breaker {breaker!r}") from None
    if latched:
        return False
    adjacent = list(adjacent)
    if adjacent and all(adjacent):
        state.latched[breaker] = True
        return True
    return False


def reset_breaker(state: SyncLatchState, breaker: str) -> None:
    if breaker not in state.latched:
        raise TopologyError(f"unknown breaker {breaker!r}")
    state.latched[breaker] = False


class DwellTimer:
    """Asserts only after the raw condition has held continuously for `dwell` seconds."""

    def __init__(self, dwell: float) -> None:
        self.dwell = dwell
        self._since: dict[str, float] = {}

    def update(self, ibr: str, raw: bool, t: float) -> bool:
        if not raw:
            self._since.pop(ibr, None)
            return False
        since = self._since.setdefault(ibr, t)
        return t - since >= self.dwell - 1e-12


class SyncLogic:
    """Synchronization relays of one NMG, owning its `SyncLatchState`."""

    def __init__(self, topology: NmgTopology, config: SyncCheckConfig) -> None:
        self.topology = topology
        self.config = config
        self.state = SyncLatchState.for_topology(topology)
        self.dwell = DwellTimer(config.dwell)

    def evaluate(
        self,
        t: float,
        deviations: Mapping[str, tuple[float, float, float]],
        neighbor_oks: Mapping[str, Iterable[bool]],
        own_oks: Mapping[str, bool] | None = None,
    ) -> None:
        """
        Update `local_ok` and `stage2_ok` of every IBR from `(Δf, ΔV, Σ|Δδ|)`.

        `own_oks` are the IBRs' own flags taken from the same exchange as
        `neighbor_oks`; stage 2 then only changes at exchange instants and
        rises for every IBR at once when all flags agree. Without it the live
        `local_ok` is used.
        """

        for ibr in self.topology.ibr_ids:
            raw = local_sync_check(self.config, *deviations[ibr])
            self.state.local_ok[ibr] = self.dwell.update(ibr, raw, t)
        own = self.state.local_ok if own_oks is None else own_oks
        for ibr in self.topology.ibr_ids:
            self.state.stage2_ok[ibr] = stage2_check(own[ibr], neighbor_oks[ibr])

    def update_breakers(self) -> list[str]:
        """Run every latch in breaker id order; returns the breakers that just closed."""

        closed = []
        for breaker in self.topology.breaker_ids:
            adjacent = sorted(self.topology.breaker(breaker).adjacent_ibrs)
            if latch_update(self.state, breaker, (self.state.stage2_ok[ibr] for ibr in adjacent)):
                _logger.debug("breaker %s latched", breaker)
                closed.append(breaker)
        return closed

    def reset(self, breaker: str) -> None:
        reset_breaker(self.state, breaker)
