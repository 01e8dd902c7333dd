#!/usr/bin/env python3

"""
Periodic neighbor exchange of consensus variables.

Every IBR publishes `(Ω, Q/Q*, δ, local_ok)` on each call; the channel
delivers them to all mailboxes at once when `t` crosses the next multiple of
the exchange period, optionally `delay` seconds late. Between exchanges the
held values are returned unchanged (zero-order hold).
"""

from __future__ import annotations as _annotations

import logging as _logging
import math as _math

from collections import deque as _deque
from dataclasses import dataclass as _dataclass
from typing import NamedTuple as _NamedTuple

import numpy as _np

from .controller import NeighborSnapshot, NeighborValue
from .errors import TopologyError
from .topology import comm_neighbors

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Mapping

    from .topology import CommGraph


_logger = _logging.getLogger(__name__)

# tolerance for float time stamps landing just short of a period boundary
_EPS = 1e-9


class ConsensusValues(_NamedTuple):
    omega_sec: float
    q_ratio: float
    delta: float
    local_ok: bool


@_dataclass(frozen=True)
class Published:
    """Consensus values of all IBRs in canonical order, as sent at time `t`."""

    t: float
    omega_sec: _np.ndarray
    q_ratio: _np.ndarray
    delta: _np.ndarray
    local_ok: _np.ndarray


class CommBus:

    graph: CommGraph
    period: float
    delay: float
    phase_every_step: bool
    last_exchange_time: float | None

    def __init__(self, graph: CommGraph, *, phase_every_step: bool | None = None) -> None:
        if not graph.period > 0:
            raise ValueError(f"communication period must be positive, got {graph.period!r}")
        self.graph = graph
        self.period = graph.period
        self.delay = graph.delay
        self.phase_every_step = (
            graph.phase_every_step if phase_every_step is None else phase_every_step
        )
        self.last_exchange_time = None
        self._index = {ibr: k for k, ibr in enumerate(graph.nodes)}
        self._last_period = -1
        self._history: _deque[Published] = _deque()
        self._held: Published | None = None
        self._held_delta: _np.ndarray | None = None
        self._neighbors = {
            ibr: sorted(comm_neighbors(graph, ibr)) for ibr in graph.nodes
        }

    def _pack(self, t: float, values: Mapping[str, ConsensusValues]) -> Published:
        rows = [values[ibr] for ibr in self.graph.nodes]
        return Published(
            t,
            _np.array([v.omega_sec for v in rows], dtype=float),
            _np.array([v.q_ratio for v in rows], dtype=float),
            _np.array([v.delta for v in rows], dtype=float),
            _np.array([v.local_ok for v in rows], dtype=bool),
        )

    def _delivered(self, t: float) -> Published:
        """Latest publication at least `delay` old (the oldest one if none is)."""

        while len(self._history) > 1 and self._history[1].t <= t - self.delay + _EPS:
            self._history.popleft()
        return self._history[0]

    def publish(self, t: float, values: Mapping[str, ConsensusValues]) -> None:
        if self._history and t < self._history[-1].t:
            raise ValueError(f"time went backwards: {t!r} < {self._history[-1].t!r}")
        self._history.append(self._pack(t, values))

    def maybe_exchange(self, t: float, values: Mapping[str, ConsensusValues]) -> bool:
        """
        Publish `values` and refresh the mailboxes if an exchange is due.

        Returns whether a full exchange happened. With `phase_every_step` the
        held phases are refreshed on every call regardless.
        """

        self.publish(t, values)
        delivered = self._delivered(t)

        current_period = _math.floor(t / self.period + _EPS)
        exchanged = current_period > self._last_period
        if exchanged:
            self._last_period = current_period
            self.last_exchange_time = t
            self._held = delivered
            self._held_delta = delivered.delta
            _logger.debug("comm exchange at t=%.6g s (values from t=%.6g s)", t, delivered.t)
        elif self.phase_every_step:
            self._held_delta = delivered.delta
        return exchanged

    @property
    def held(self) -> Published:
        if self._held is None:
            raise RuntimeError("no exchange has happened yet")
        return Published(
            self._held.t,
            self._held.omega_sec,
            self._held.q_ratio,
            self._held_delta,
            self._held.local_ok,
        )

    def snapshot_for(self, ibr: str) -> NeighborSnapshot:
        if ibr not in self._index:
            raise TopologyError(f"unknown IBR {ibr!r}")
        held = self.held
        return NeighborSnapshot(
            tuple(
                NeighborValue(
                    nb.id,
                    float(held.omega_sec[self._index[nb.id]]),
                    float(held.q_ratio[self._index[nb.id]]),
                    float(held.delta[self._index[nb.id]]),
                    bool(held.local_ok[self._index[nb.id]]),
                    nb.a,
                    nb.b,
                    nb.d,
                )
                for nb in self._neighbors[ibr]
            ),
            self.last_exchange_time,
        )

    def neighbor_local_oks(self, ibr: str) -> list[bool]:
        if ibr not in self._index:
            raise TopologyError(f"unknown IBR {ibr!r}")
        held = self.held
        return [bool(held.local_ok[self._index[nb.id]]) for nb in self._neighbors[ibr]]

    def held_local_oks(self) -> dict[str, bool]:
        """Every IBR's `local_ok` as published at the last exchange."""

        held = self.held
        return {ibr: bool(held.local_ok[k]) for ibr, k in self._index.items()}
