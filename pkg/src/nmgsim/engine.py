#!/usr/bin/env python3

"""
Fixed-step closed-loop simulation of an NMG.

Each step runs, in this order:

1. the communication exchange (if one is due);
2. breaker actions latched or reset during the previous step, recomputation
   of the islands with setpoint averaging over newly merged ones, and the
   network solve with the current phases and the previously commanded
   voltages;
3. the controller output maps and the synchronization checks;
4. the breaker latches and the trace record;
5. integration of the controller states over one step with the injections
   held fixed.
"""

from __future__ import annotations as _annotations

import logging as _logging
import math as _math

from dataclasses import dataclass as _dataclass, field as _field
from enum import StrEnum as _StrEnum
from typing import NamedTuple as _NamedTuple

import numpy as _np

from .comms import CommBus, ConsensusValues
from .controller import (
    ControllerBank,
    IbrState,
    apply_setpoint_reassignment,
    gated_gain_matrices,
    output_voltage,
    wrap_angle,
)
from .errors import SolverError
from .integrate import METHODS, integrate
from .network import NetworkSolution, SourceSetpoint, build_admittance, solve_island
from .sync import SyncCheckConfig, SyncLogic
from .topology import electrical_islands, ibr_island_map

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping

    from .controller import IbrParams, SoftStartProfile
    from .topology import NmgTopology


_logger = _logging.getLogger(__name__)

# relative power-balance residual above which a solve is logged as a warning
BALANCE_TOL = 1e-6


@_dataclass(frozen=True)
class SimConfig:
    dt_control: float
    duration: float
    integrator: str = 'rk4'
    soft_start: SoftStartProfile | None = None
    record_every: int = 1
    phase_consensus_after_closure: bool = False
    disable_dapi_voltage: bool = False
    disable_phase_consensus: bool = False
    initially_closed: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not (_math.isfinite(self.dt_control) and self.dt_control > 0):
            raise ValueError(f"control step must be positive, got {self.dt_control!r}")
        if not (_math.isfinite(self.duration) and self.duration >= 0):
            raise ValueError(f"duration must not be negative, got {self.duration!r}")
        if self.integrator not in METHODS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not (isinstance(self.record_every, int) and self.record_every >= 1):
            raise ValueError(f"record_every must be a positive integer, got {self.record_every!r}")

    @property
    def n_steps(self) -> int:
        return round(self.duration / self.dt_control)


class EventKind(_StrEnum):
    CLOSURE = 'closure'
    RESET = 'reset'
    SETPOINT_REASSIGNMENT = 'setpoint-reassignment'
    SOLVER_WARNING = 'solver-warning'


@_dataclass(frozen=True, slots=True)
class Event:
    t: float
    kind: EventKind
    payload: dict[str, object]


class EventLog:
    """Chronological list of `Event`s."""

    def __init__(self) -> None:
        self._events: list[Event] = []

    def append(self, t: float, kind: EventKind, **payload: object) -> Event:
        if self._events and t < self._events[-1].t:
            raise ValueError(f"event at t={t!r} is older than the last one")
        event = Event(t, kind, payload)
        self._events.append(event)
        return event

    def of_kind(self, kind: EventKind) -> list[Event]:
        return [event for event in self._events if event.kind is kind]

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __getitem__(self, index: int) -> Event:
        return self._events[index]


@_dataclass(frozen=True, slots=True)
class IbrTrace:
    p: float
    q: float
    f: float
    v: float
    delta_deg: float
    omega_sec: float
    e_sec: float
    local_ok: bool
    stage2_ok: bool


@_dataclass(frozen=True)
class TraceRecord:
    t: float
    ibrs: dict[str, IbrTrace]
    breakers: dict[str, bool]


@_dataclass(frozen=True)
class FinalState:
    t: float
    states: dict[str, IbrState]
    params: dict[str, IbrParams]
    breakers: dict[str, bool] = _field(default_factory=dict)


class RunResult(_NamedTuple):
    traces: list[TraceRecord]
    events: EventLog
    final: FinalState


class Simulation:
    """
    Mutable world state of one run.

    Construct, then call `step()` repeatedly or `run()` once. The initial
    network solve happens here so that the first exchange can publish
    reactive power ratios.
    """

    def __init__(
        self,
        topology: NmgTopology,
        params: Mapping[str, IbrParams],
        config: SimConfig,
        sync_config: SyncCheckConfig | None = None,
        *,
        initial_states: Mapping[str, IbrState] | None = None,
    ) -> None:
        self.topology = topology
        self.config = config
        self.ibrs = topology.ibr_ids
        self.events = EventLog()
        self.step_index = 0

        self._n = len(self.ibrs)
        self._params = {ibr: params[ibr] for ibr in self.ibrs}
        self._bank = ControllerBank(self.ibrs, self._params)
        states = initial_states or {}
        self._x = _np.concatenate([
            [states.get(ibr, IbrState()).delta for ibr in self.ibrs],
            [states.get(ibr, IbrState()).omega_sec for ibr in self.ibrs],
            [states.get(ibr, IbrState()).e_sec for ibr in self.ibrs],
        ]).astype(float)

        self._comm = CommBus(topology.comm)
        self._sync = SyncLogic(topology, sync_config or SyncCheckConfig())
        self._structural_d = topology.comm.gain_matrices(self.ibrs)[2]
        self._buses = [topology.bus_of(ibr) for ibr in self.ibrs]
        self._loads = topology.loads()

        self._closed = {breaker: False for breaker in topology.breaker_ids}
        self._pending_close: list[str] = []
        self._pending_reset: list[str] = []
        for breaker in sorted(config.initially_closed):
            topology.breaker(breaker)
            self._closed[breaker] = True
            self._sync.state.latched[breaker] = True

        self._island_map: dict[str, int] | None = None
        self._apply_topology(0.0)

        soft = self._soft_start(0.0)
        self._v_cmd = output_voltage(self._bank.params, self._state(), self._bank.params.q_star, soft)
        self._p, self._q = self._solve(0.0)

    @property
    def t(self) -> float:
        return self.step_index * self.config.dt_control

    @property
    def params(self) -> dict[str, IbrParams]:
        return dict(self._params)

    @property
    def breaker_states(self) -> dict[str, bool]:
        return dict(self._closed)

    def _state(self, x: _np.ndarray | None = None) -> IbrState:
        return IbrState(*(self._x if x is None else x).reshape(3, self._n))

    def _soft_start(self, t: float) -> tuple[SoftStartProfile, float] | None:
        profile = self.config.soft_start
        return None if profile is None else (profile, t)

    def _apply_topology(self, t: float) -> None:
        island_map = ibr_island_map(self.topology, self._closed)
        previous = self._island_map

        for island in sorted(set(island_map.values())):
            members = [ibr for ibr in self.ibrs if island_map[ibr] == island]
            if previous is None:
                merged = len(members) > 1
            else:
                merged = len({previous[ibr] for ibr in members}) > 1
            if not merged:
                continue
            self._params = apply_setpoint_reassignment(self._params, members, self.topology.comm)
            self._bank.set_params(self._params)
            averaged = self._params[members[0]]
            self.events.append(
                t,
                EventKind.SETPOINT_REASSIGNMENT,
                island=tuple(members),
                p_star=averaged.p_star,
                q_star=averaged.q_star,
            )
            _logger.info(
                "t=%.4f s: setpoints of %s averaged to P*=%.6g W, Q*=%.6g VAr",
                t, ', '.join(members), averaged.p_star, averaged.q_star,
            )

        self._island_map = island_map
        self._admittances = [
            build_admittance(self.topology, self._closed, island)
            for island in electrical_islands(self.topology, self._closed)
        ]
        self._gains = gated_gain_matrices(
            self.topology.comm,
            self.ibrs,
            island_map,
            phase_consensus_after_closure=self.config.phase_consensus_after_closure,
            disable_phase_consensus=self.config.disable_phase_consensus,
        )

    def _solve(self, t: float) -> tuple[_np.ndarray, _np.ndarray]:
        delta = self._x[: self._n]
        sources = {
            ibr: SourceSetpoint(self._buses[k], float(self._v_cmd[k]), float(delta[k]))
            for k, ibr in enumerate(self.ibrs)
        }
        parts = []
        for admittance in self._admittances:
            try:
                part = solve_island(admittance, sources, self._loads)
            except SolverError as exc:
                raise SolverError(exc.condition, t=t, island=admittance.buses) from None
            residual = part.balance_residual()
            if residual > BALANCE_TOL:
                self.events.append(
                    t, EventKind.SOLVER_WARNING, island=admittance.buses, residual=residual
                )
                _logger.warning(
                    "t=%.4f s: power balance residual %.3g in island {%s}",
                    t, residual, ', '.join(admittance.buses),
                )
            parts.append(part)
        solution = NetworkSolution.merge(parts)
        s = _np.array([solution.injections[ibr] for ibr in self.ibrs])
        return s.real, s.imag

    def reset_breaker(self, breaker: str) -> None:
        """Unlatch `breaker`; it opens at the next step boundary."""

        self._sync.reset(breaker)
        if breaker in self._pending_close:
            self._pending_close.remove(breaker)
        if self._closed[breaker] and breaker not in self._pending_reset:
            self._pending_reset.append(breaker)

    def step(self) -> TraceRecord | None:
        """Advance by one control step; returns the trace record if one is due."""

        t = self.t
        n = self._n
        config = self.config
        state = self._state()
        local_ok = self._sync.state.local_ok

        # (1) exchange
        q_ratio = self._bank.q_ratios(self._q, self._gains.b)
        self._comm.maybe_exchange(
            t,
            {
                ibr: ConsensusValues(
                    state.omega_sec[k], q_ratio[k], state.delta[k], local_ok[ibr]
                )
                for k, ibr in enumerate(self.ibrs)
            },
        )
        held = self._comm.held

        # (2) breaker actions from the previous step, network solve
        if self._pending_close or self._pending_reset:
            for breaker in self._pending_reset:
                self._closed[breaker] = False
                self.events.append(t, EventKind.RESET, breaker=breaker)
                _logger.info("t=%.4f s: breaker %s opened", t, breaker)
            for breaker in self._pending_close:
                self._closed[breaker] = True
            self._pending_close.clear()
            self._pending_reset.clear()
            self._apply_topology(t)
        self._p, self._q = p, q = self._solve(t)

        # (3) outputs and synchronization checks
        soft = self._soft_start(t)
        omega, v_out = self._bank.outputs(state, p, q, soft)
        params = self._bank.params
        d_f = (omega - params.omega_star) / (2 * _math.pi)
        d_v = (v_out - params.v_star) / params.v_star
        spread = _np.degrees(
            self._bank.phase_spread(state.delta, held.delta, self._gains, self._structural_d)
        )
        self._sync.evaluate(
            t,
            {ibr: (d_f[k], d_v[k], spread[k]) for k, ibr in enumerate(self.ibrs)},
            {ibr: self._comm.neighbor_local_oks(ibr) for ibr in self.ibrs},
            self._comm.held_local_oks(),
        )

        # (4) latches and trace
        closures = [b for b in self._sync.update_breakers() if not self._closed[b]]
        for breaker in closures:
            self._pending_close.append(breaker)
            self.events.append(
                t,
                EventKind.CLOSURE,
                breaker=breaker,
                adjacent=tuple(sorted(self.topology.breaker(breaker).adjacent_ibrs)),
            )
            _logger.info("t=%.4f s: breaker %s latched closed", t, breaker)

        record = None
        if self.step_index % config.record_every == 0 or closures:
            sync = self._sync.state
            wrapped = _np.degrees(wrap_angle(state.delta))
            record = TraceRecord(
                t,
                {
                    ibr: IbrTrace(
                        float(p[k]),
                        float(q[k]),
                        float(omega[k] / (2 * _math.pi)),
                        float(v_out[k]),
                        float(wrapped[k]),
                        float(state.omega_sec[k]),
                        float(state.e_sec[k]),
                        sync.local_ok[ibr],
                        sync.stage2_ok[ibr],
                    )
                    for k, ibr in enumerate(self.ibrs)
                },
                dict(sync.latched),
            )

        # (5) integration with frozen injections
        profile = config.soft_start
        freeze = config.disable_dapi_voltage or (profile is not None and not profile.done(t))
        gains = self._gains
        bank = self._bank

        def derivative(tau: float, x: _np.ndarray) -> _np.ndarray:
            rates = bank.derivative(
                IbrState(*x.reshape(3, n)),
                p,
                q,
                gains,
                held,
                held.q_ratio,
                self._soft_start(t + tau),
                freeze_voltage=freeze,
            )
            return _np.concatenate([rates.delta, rates.omega_sec, rates.e_sec])

        try:
            self._x = integrate(derivative, self._x, config.dt_control, config.integrator)
        except SolverError as exc:
            raise SolverError(exc.condition, t=t, island=self.ibrs) from None

        # the next network solve runs against this step's commanded voltage
        self._v_cmd = v_out
        self.step_index += 1
        return record

    def final_state(self) -> FinalState:
        state = self._state()
        return FinalState(
            self.t,
            {
                ibr: IbrState(
                    float(state.delta[k]), float(state.omega_sec[k]), float(state.e_sec[k])
                )
                for k, ibr in enumerate(self.ibrs)
            },
            dict(self._params),
            dict(self._closed),
        )

    def run(self) -> RunResult:
        n_steps = self.config.n_steps
        _logger.info(
            "running %d steps of %.6g s (%s)", n_steps, self.config.dt_control, self.config.integrator
        )
        traces = []
        for _ in range(n_steps):
            record = self.step()
            if record is not None:
                traces.append(record)
        _logger.info(
            "run finished at t=%.6g s with %d closures",
            self.t, len(self.events.of_kind(EventKind.CLOSURE)),
        )
        return RunResult(traces, self.events, self.final_state())


def run_scenario(
    topology: NmgTopology,
    params: Mapping[str, IbrParams],
    config: SimConfig,
    sync_config: SyncCheckConfig | None = None,
    *,
    initial_states: Mapping[str, IbrState] | None = None,
) -> RunResult:
    return Simulation(
        topology, params, config, sync_config, initial_states=initial_states
    ).run()
