#!/usr/bin/env python3

"""
Grid-forming IBR control laws.

Droop output maps, distributed-averaging PI (DAPI) frequency and voltage
consensus, phase consensus and the soft-start voltage ramp. All quantities are
SI with frequency in rad/s; conversion from Hz happens in the scenario parser.

The scalar functions work unchanged on numpy arrays: `IbrParams.stack()` and
`IbrState.stack()` build array-valued instances so that `ControllerBank` runs
the same formulas for all IBRs of an NMG at once.
"""

from __future__ import annotations as _annotations

import math as _math

from dataclasses import dataclass as _dataclass, fields as _fields, replace as _replace
from typing import NamedTuple as _NamedTuple

import numpy as _np

from .errors import ControllerError

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from .topology import CommGraph


@_dataclass(frozen=True, slots=True)
class IbrParams:
    omega_star: float
    v_star: float
    m: float
    n: float
    p_star: float
    q_star: float
    k: float
    kappa: float
    xi: float

    @classmethod
    def stack(cls, params: Sequence[IbrParams]) -> IbrParams:
        return cls(**{
            f.name: _np.array([getattr(p, f.name) for p in params], dtype=float)
            for f in _fields(cls)
        })


def validate_params(ibr: str, params: IbrParams) -> list[str]:
    violations = []
    for name in ('m', 'n', 'k', 'kappa'):
        value = getattr(params, name)
        if not (_math.isfinite(value) and value > 0):
            violations.append(f"IBR {ibr!r}: {name} must be positive, got {value!r}")
    if not (_math.isfinite(params.xi) and params.xi >= 0):
        violations.append(f"IBR {ibr!r}: xi must not be negative, got {params.xi!r}")
    if not (_math.isfinite(params.v_star) and params.v_star > 0):
        violations.append(f"IBR {ibr!r}: v_star must be positive, got {params.v_star!r}")
    if not (_math.isfinite(params.omega_star) and params.omega_star > 0):
        violations.append(f"IBR {ibr!r}: omega_star must be positive, got {params.omega_star!r}")
    return violations


@_dataclass(frozen=True, slots=True)
class IbrState:
    delta: float = 0.0
    omega_sec: float = 0.0
    e_sec: float = 0.0

    @property
    def wrapped_delta(self) -> float:
        return wrap_angle(self.delta)

    @classmethod
    def stack(cls, states: Sequence[IbrState]) -> IbrState:
        return cls(
            _np.array([s.delta for s in states], dtype=float),
            _np.array([s.omega_sec for s in states], dtype=float),
            _np.array([s.e_sec for s in states], dtype=float),
        )


def wrap_angle(delta):
    """Wrap to (−π, π]."""
    return _math.pi - _np.mod(_math.pi - delta, 2 * _math.pi)


@_dataclass(frozen=True, slots=True)
class SoftStartProfile:
    """
    Linear voltage reference ramp from 0 to `target` over `ramp_duration`.

    One profile serves every IBR; scenarios set `target` to the common
    nominal voltage, not to each IBR's own `v_star`.
    """

    ramp_duration: float
    target: float

    def __post_init__(self) -> None:
        if not self.ramp_duration > 0:
            raise ValueError(f"ramp duration must be positive, got {self.ramp_duration!r}")

    def value(self, t: float) -> float:
        return min(t / self.ramp_duration, 1.0) * self.target

    def done(self, t: float) -> bool:
        return t >= self.ramp_duration


class NeighborValue(_NamedTuple):
    id: str
    omega_sec: float
    q_ratio: float
    delta: float
    local_ok: bool
    a: float
    b: float
    d: float


@_dataclass(frozen=True)
class NeighborSnapshot:
    neighbors: tuple[NeighborValue, ...]
    snapshot_time: float

    def omega_term(self, omega_sec: float) -> float:
        return sum(nb.a * (omega_sec - nb.omega_sec) for nb in self.neighbors)

    def q_term(self, q_ratio: float) -> float:
        return sum(nb.b * (q_ratio - nb.q_ratio) for nb in self.neighbors)

    def phase_term(self, delta: float) -> float:
        return sum(nb.d * (delta - nb.delta) for nb in self.neighbors)

    def phase_spread(self, delta: float) -> float:
        """`Σ d_ij·|δ_i − δ_j|`, or infinity without any phase-consensus neighbor."""
        if not any(nb.d for nb in self.neighbors):
            return _math.inf
        return sum(nb.d * abs(delta - nb.delta) for nb in self.neighbors if nb.d)

    def local_oks(self) -> list[bool]:
        return [nb.local_ok for nb in self.neighbors]


def output_frequency(params: IbrParams, state: IbrState, p):
    return params.omega_star - params.m * (p - params.p_star) + state.omega_sec


def output_voltage(
    params: IbrParams,
    state: IbrState,
    q,
    soft_start: tuple[SoftStartProfile, float] | None = None,
):
    """
    Commanded voltage magnitude.

    With `soft_start=(profile, t)` the ramp value replaces `v_star` as the
    voltage reference until the ramp is complete.
    """

    reference = params.v_star
    if soft_start is not None:
        profile, t = soft_start
        if not profile.done(t):
            reference = profile.value(t)
    return reference - params.n * (q - params.q_star) + state.e_sec


def consensus_rates(
    params: IbrParams,
    d_omega,
    d_v,
    omega_term,
    q_term,
    phase_term,
    *,
    freeze_voltage: bool = False,
) -> IbrState:
    """Right-hand sides of the phase, frequency and voltage consensus laws."""

    ddelta = d_omega - phase_term
    domega = (-d_omega - omega_term) / params.k
    if freeze_voltage:
        de = _np.zeros_like(d_v) if isinstance(d_v, _np.ndarray) else 0.0
    else:
        de = (-params.xi * d_v - q_term) / params.kappa
    return IbrState(ddelta, domega, de)


def q_ratio(params: IbrParams, q: float) -> float:
    if params.q_star == 0:
        raise ControllerError("reactive power ratio undefined for q_star = 0")
    return q / params.q_star


def state_derivative(
    params: IbrParams,
    state: IbrState,
    p: float,
    q: float,
    omega: float,
    v: float,
    neighbors: NeighborSnapshot,
    *,
    freeze_voltage: bool = False,
) -> IbrState:
    """
    Time derivative of one IBR's `(delta, omega_sec, e_sec)`.

    `omega` and `v` are the measured (commanded) outputs; neighbor values come
    from `neighbors` as held by the communication channel.
    """

    d_omega = omega - params.omega_star
    d_v = v - params.v_star
    if any(nb.b for nb in neighbors.neighbors):
        q_term = neighbors.q_term(q_ratio(params, q))
    else:
        q_term = 0.0
    return consensus_rates(
        params,
        d_omega,
        d_v,
        neighbors.omega_term(state.omega_sec),
        q_term,
        neighbors.phase_term(state.delta),
        freeze_voltage=freeze_voltage,
    )


def apply_setpoint_reassignment(
    params: Mapping[str, IbrParams],
    island: Iterable[str],
    comm: CommGraph | None = None,
) -> dict[str, IbrParams]:
    """Average `p_star` and `q_star` over the IBRs of `island`; others are unchanged."""

    island = sorted(island)
    if not island:
        raise ControllerError("setpoint reassignment over an empty island")
    try:
        members = [params[ibr] for ibr in island]
    except KeyError as exc:
        raise ControllerError(f"unknown IBR {exc.args[0]!r}") from None

    p_avg = sum(p.p_star for p in members) / len(members)
    q_avg = sum(p.q_star for p in members) / len(members)

    if q_avg == 0 and comm is not None:
        for i in island:
            if any(comm.gains(i, j)[1] for j in comm.nodes):
                raise ControllerError(
                    f"averaged q_star is 0 but IBR {i!r} has voltage consensus gains"
                )

    updated = dict(params)
    for ibr in island:
        updated[ibr] = _replace(params[ibr], p_star=p_avg, q_star=q_avg)
    return updated


class GatedGains(_NamedTuple):
    a: _np.ndarray
    b: _np.ndarray
    d: _np.ndarray
    d_sync: _np.ndarray


def gated_gain_matrices(
    comm: CommGraph,
    order: Sequence[str],
    island_of: Mapping[str, int],
    *,
    phase_consensus_after_closure: bool = False,
    disable_phase_consensus: bool = False,
) -> GatedGains:
    """
    Consensus gain matrices restricted to the current islanding.

    Frequency and voltage consensus act within an island, phase consensus
    across islands (and within them too if `phase_consensus_after_closure`).
    `d_sync` are the phase terms the synchronization check sums over; it
    ignores `disable_phase_consensus` so that ablated runs still see the true
    phase mismatch.
    """

    a, b, d = comm.gain_matrices(order)
    islands = _np.array([island_of[ibr] for ibr in order])
    same = islands[:, None] == islands[None, :]
    d_sync = d if phase_consensus_after_closure else d * ~same
    return GatedGains(
        a * same, b * same, _np.zeros_like(d) if disable_phase_consensus else d_sync, d_sync
    )


class ControllerBank:
    """
    All IBR controllers of an NMG evaluated as arrays in canonical id order.

    Neighbor values are read from the held vectors published over the
    communication channel; each IBR's own values are current.
    """

    ibrs: tuple[str, ...]
    params: IbrParams

    def __init__(self, ibrs: Sequence[str], params: Mapping[str, IbrParams]) -> None:
        self.ibrs = tuple(ibrs)
        self.set_params(params)

    def set_params(self, params: Mapping[str, IbrParams]) -> None:
        self.params = IbrParams.stack([params[ibr] for ibr in self.ibrs])

    def q_ratios(self, q: _np.ndarray, voltage_gains: _np.ndarray | None = None) -> _np.ndarray:
        """
        `Q/Q*` per IBR.

        With `voltage_gains`, an IBR with `q_star = 0` and no voltage consensus
        gain reads 0 since no consensus term uses its ratio.
        """

        q_star = self.params.q_star
        undefined = q_star == 0
        if voltage_gains is not None:
            undefined &= (voltage_gains != 0).any(axis=0) | (voltage_gains != 0).any(axis=1)
        if undefined.any():
            names = ', '.join(ibr for ibr, bad in zip(self.ibrs, undefined) if bad)
            raise ControllerError(f"reactive power ratio undefined for q_star = 0 ({names})")
        return _np.divide(q, q_star, out=_np.zeros_like(q), where=q_star != 0)

    def outputs(
        self,
        state: IbrState,
        p: _np.ndarray,
        q: _np.ndarray,
        soft_start: tuple[SoftStartProfile, float] | None = None,
    ) -> tuple[_np.ndarray, _np.ndarray]:
        return (
            output_frequency(self.params, state, p),
            output_voltage(self.params, state, q, soft_start),
        )

    def derivative(
        self,
        state: IbrState,
        p: _np.ndarray,
        q: _np.ndarray,
        gains: GatedGains,
        held: IbrState,
        held_q_ratio: _np.ndarray,
        soft_start: tuple[SoftStartProfile, float] | None = None,
        *,
        freeze_voltage: bool = False,
    ) -> IbrState:
        omega, v = self.outputs(state, p, q, soft_start)

        def laplacian_term(w: _np.ndarray, own: _np.ndarray, other: _np.ndarray) -> _np.ndarray:
            return w.sum(axis=1) * own - w @ other

        return consensus_rates(
            self.params,
            omega - self.params.omega_star,
            v - self.params.v_star,
            laplacian_term(gains.a, state.omega_sec, held.omega_sec),
            laplacian_term(gains.b, self.q_ratios(q, gains.b), held_q_ratio),
            laplacian_term(gains.d, state.delta, held.delta),
            freeze_voltage=freeze_voltage,
        )

    @staticmethod
    def phase_spread(
        delta: _np.ndarray, held_delta: _np.ndarray, gains: GatedGains, structural_d: _np.ndarray
    ) -> _np.ndarray:
        """Per-IBR `Σ d_ij·|δ_i − δ_j|` over active terms; infinity without any d neighbor."""
        spread = (gains.d_sync * _np.abs(delta[:, None] - held_delta[None, :])).sum(axis=1)
        return _np.where(structural_d.any(axis=1), spread, _np.inf)
