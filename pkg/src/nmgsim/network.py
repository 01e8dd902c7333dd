#!/usr/bin/env python3

"""
Quasi-stationary phasor solution of the electrical network.

Every IBR bus is an ideal voltage source at the controller-commanded
`V_i∠δ_i`; the remaining buses are solved from the island admittance system.
Powers are single-phase-equivalent scalars, `S = V·conj(I)` with `V` the
peak line-to-neutral phasor, and injections use the generator sign
convention (positive means delivering into the network).
"""

from __future__ import annotations as _annotations

import cmath as _cmath
import logging as _logging

from dataclasses import dataclass as _dataclass
from typing import NamedTuple as _NamedTuple

import numpy as _np
import scipy.linalg as _sla

from .errors import SolverError
from .topology import LoadModel

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    from .topology import LoadSpec, NmgTopology

    BreakerStates = Mapping[str, bool]


_logger = _logging.getLogger(__name__)

# base power for the constant-power Newton mismatch
S_BASE = 1e6
NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 50
# below this fraction of the nominal voltage constant-power loads are solved as
# constant impedance (no power-flow solution exists near zero voltage)
CONSTANT_POWER_MIN_V = 0.7
# absolute floor (W) for the relative power-balance residual
BALANCE_FLOOR = 1.0


class SourceSetpoint(_NamedTuple):
    bus: str
    v: float
    delta: float

    @property
    def phasor(self) -> complex:
        return _cmath.rect(self.v, self.delta)


@_dataclass(frozen=True, eq=False)
class AdmittanceMatrix:
    """
    Dense Y-bus of one island.

    `y` is indexed by `buses`; `shunts` holds the constant-impedance load
    admittances stamped on the diagonal and `branches` the series admittance of
    every conducting line as `(from index, to index, y)`.
    """

    buses: tuple[str, ...]
    y: _np.ndarray
    shunts: _np.ndarray
    branches: tuple[tuple[int, int, complex], ...]
    load_model_voltage: float

    def index(self, bus: str) -> int:
        return self.buses.index(bus)


@_dataclass(frozen=True)
class NetworkSolution:
    bus_voltages: dict[str, complex]
    injections: dict[str, complex]
    load_power: dict[str, complex]
    losses: float

    def p(self, ibr: str) -> float:
        return self.injections[ibr].real

    def q(self, ibr: str) -> float:
        return self.injections[ibr].imag

    def balance_residual(self) -> float:
        """`|ΣP_inj − ΣP_load − ΣP_loss|` relative to the served load."""

        p_inj = sum(s.real for s in self.injections.values())
        p_load = sum(s.real for s in self.load_power.values())
        return abs(p_inj - p_load - self.losses) / max(abs(p_load), abs(p_inj), BALANCE_FLOOR)

    @classmethod
    def merge(cls, parts: Iterable[NetworkSolution]) -> NetworkSolution:
        bus_voltages: dict[str, complex] = {}
        injections: dict[str, complex] = {}
        load_power: dict[str, complex] = {}
        losses = 0.0
        for part in parts:
            bus_voltages.update(part.bus_voltages)
            injections.update(part.injections)
            load_power.update(part.load_power)
            losses += part.losses
        return cls(bus_voltages, injections, load_power, losses)


def build_admittance(
    topology: NmgTopology,
    breaker_states: BreakerStates,
    island: Iterable[str],
    load_model_voltage: float | None = None,
) -> AdmittanceMatrix:

    buses = tuple(sorted(island))
    index = {bus: k for k, bus in enumerate(buses)}
    v_nom = topology.v_nominal if load_model_voltage is None else load_model_voltage

    y = _np.zeros((len(buses), len(buses)), dtype=complex)
    shunts = _np.zeros(len(buses), dtype=complex)
    branches: list[tuple[int, int, complex]] = []

    for line in topology.lines:
        if line.breaker is not None and not breaker_states.get(line.breaker, False):
            continue
        if line.from_bus not in index or line.to_bus not in index:
            continue
        f, t = index[line.from_bus], index[line.to_bus]
        ys = line.admittance
        y[f, f] += ys
        y[t, t] += ys
        y[f, t] -= ys
        y[t, f] -= ys
        branches.append((f, t, ys))

    for bus in buses:
        load = topology.bus(bus).load
        if load is not None and load.model is LoadModel.CONSTANT_IMPEDANCE:
            shunts[index[bus]] = complex(load.p_nominal, -load.q_nominal) / v_nom**2

    y[_np.diag_indices_from(y)] += shunts

    return AdmittanceMatrix(buses, y, shunts, tuple(branches), v_nom)


def _dsbus_dv(y: _np.ndarray, v: _np.ndarray) -> tuple[_np.ndarray, _np.ndarray]:
    i_bus = y @ v
    v_norm = v / _np.abs(v)
    ds_dvm = _np.diag(v) @ _np.conj(y @ _np.diag(v_norm)) + _np.diag(_np.conj(i_bus) * v_norm)
    ds_dva = 1j * _np.diag(v) @ _np.conj(_np.diag(i_bus) - y @ _np.diag(v))
    return ds_dvm, ds_dva


def _newton(
    y: _np.ndarray,
    v: _np.ndarray,
    free: _np.ndarray,
    s_spec: _np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[_np.ndarray, int]:
    """Solve `v[free]` so that the injections at the free buses equal `s_spec`."""

    nf = len(free)
    for iteration in range(max_iter + 1):
        mismatch = (v * _np.conj(y @ v))[free] - s_spec
        f = _np.concatenate([mismatch.real, mismatch.imag]) / S_BASE
        if _np.max(_np.abs(f)) < tol:
            return v, iteration
        if iteration == max_iter:
            break
        ds_dvm, ds_dva = _dsbus_dv(y, v)
        sub = _np.ix_(free, free)
        jac = _np.block([
            [ds_dva[sub].real, ds_dvm[sub].real],
            [ds_dva[sub].imag, ds_dvm[sub].imag],
        ]) / S_BASE
        try:
            dx = _sla.solve(jac, -f)
        except _sla.LinAlgError:
            raise SolverError("singular Jacobian in constant-power Newton iteration") from None
        va = _np.angle(v[free]) + dx[:nf]
        vm = _np.abs(v[free]) + dx[nf:]
        v = v.copy()
        v[free] = vm * _np.exp(1j * va)

    raise SolverError(f"constant-power Newton iteration did not converge in {max_iter} steps")


def solve_island(
    admittance: AdmittanceMatrix,
    ibr_sources: Mapping[str, SourceSetpoint],
    loads: Mapping[str, LoadSpec],
    *,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> NetworkSolution:
    """
    Solve one island for fixed source phasors.

    `ibr_sources` maps IBR ids to their bus and commanded voltage; `loads`
    maps bus ids to load specs (buses of other islands are ignored).
    """

    buses = admittance.buses
    index = {bus: k for k, bus in enumerate(buses)}
    n = len(buses)
    v_nom = admittance.load_model_voltage

    sources = {ibr: src for ibr, src in ibr_sources.items() if src.bus in index}
    source_idx = sorted({index[src.bus] for src in sources.values()})
    free = _np.array([k for k in range(n) if k not in set(source_idx)], dtype=int)

    v = _np.zeros(n, dtype=complex)
    for src in sources.values():
        v[index[src.bus]] = src.phasor

    island_loads = {bus: load for bus, load in loads.items() if bus in index}
    v_ref = max((abs(src.v) for src in sources.values()), default=0.0)
    power_as_impedance = v_ref < CONSTANT_POWER_MIN_V * v_nom

    y = admittance.y
    shunts = admittance.shunts
    s_const = _np.zeros(n, dtype=complex)
    for bus, load in island_loads.items():
        if load.model is not LoadModel.CONSTANT_POWER:
            continue
        s_nom = complex(load.p_nominal, load.q_nominal)
        if power_as_impedance:
            extra = _np.zeros(n, dtype=complex)
            extra[index[bus]] = s_nom.conjugate() / v_nom**2
            shunts = shunts + extra
        else:
            s_const[index[bus]] = s_nom
    if shunts is not admittance.shunts:
        y = y + _np.diag(shunts - admittance.shunts)

    has_load = bool(_np.any(shunts != 0) or _np.any(s_const != 0))
    if not source_idx:
        if has_load:
            raise SolverError("island carries load but no source", island=buses)
        return NetworkSolution({bus: 0j for bus in buses}, {}, {bus: 0j for bus in island_loads}, 0.0)

    if len(free):
        src = _np.array(source_idx, dtype=int)
        if _np.any(s_const[free] != 0):
            v[free] = _np.mean(v[src])
            if _np.any(v[free] == 0):
                v[free] = v_ref
            v, iterations = _newton(y, v, free, -s_const[free], tol, max_iter)
            _logger.debug("constant-power Newton converged in %d iterations", iterations)
        else:
            try:
                v[free] = _sla.solve(y[_np.ix_(free, free)], -y[_np.ix_(free, src)] @ v[src])
            except _sla.LinAlgError:
                raise SolverError("singular island admittance system", island=buses) from None

    s_bus = v * _np.conj(y @ v) + s_const
    injections = {ibr: complex(s_bus[index[src.bus]]) for ibr, src in sorted(sources.items())}

    load_power = {
        bus: complex(abs(v[index[bus]]) ** 2 * _np.conj(shunts[index[bus]]) + s_const[index[bus]])
        for bus in island_loads
    }
    losses = float(sum(abs(v[f] - v[t]) ** 2 * ys.real for f, t, ys in admittance.branches))

    return NetworkSolution(
        {bus: complex(v[k]) for k, bus in enumerate(buses)}, injections, load_power, losses
    )
