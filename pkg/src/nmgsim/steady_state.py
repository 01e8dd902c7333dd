#!/usr/bin/env python3

"""
Algebraic oracle for the closed-loop equilibrium.

Sets every controller derivative to zero and solves the result together with
the network equations by damped Gauss-Newton iteration. The unknowns per IBR
are `δ, Ω, e` and the commanded voltage `V`; phases are only determined up to
a common rotation, which the minimum-norm step leaves alone.
"""

from __future__ import annotations as _annotations

import logging as _logging
import math as _math

from typing import NamedTuple as _NamedTuple

import numpy as _np

from .controller import (
    ControllerBank,
    IbrState,
    apply_setpoint_reassignment,
    gated_gain_matrices,
    output_frequency,
    output_voltage,
)
from .errors import SolverError
from .network import NetworkSolution, SourceSetpoint, build_admittance, solve_island
from .topology import electrical_islands, ibr_island_map

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Mapping

    from .controller import IbrParams
    from .topology import CommGraph, NmgTopology


_logger = _logging.getLogger(__name__)

TOL = 1e-9
MAX_ITER = 50


class SteadyStatePoint(_NamedTuple):
    p: float
    q: float
    f: float
    v: float
    delta: float
    omega_sec: float
    e_sec: float


def closed_configuration(
    topology: NmgTopology, params: Mapping[str, IbrParams]
) -> tuple[dict[str, bool], dict[str, IbrParams]]:
    """All breakers closed, with setpoints averaged over each resulting island."""

    states = {breaker: True for breaker in topology.breaker_ids}
    for island in electrical_islands(topology, states):
        ibrs = [topology.bus(bus).ibr for bus in island if topology.bus(bus).ibr is not None]
        if len(ibrs) > 1:
            params = apply_setpoint_reassignment(params, ibrs, topology.comm)
    return states, dict(params)


def _laplacian(w: _np.ndarray, x: _np.ndarray) -> _np.ndarray:
    return w.sum(axis=1) * x - w @ x


def solve_steady_state(
    topology: NmgTopology,
    params: Mapping[str, IbrParams],
    comm: CommGraph | None,
    breaker_states: Mapping[str, bool],
    *,
    phase_consensus_after_closure: bool = False,
    disable_phase_consensus: bool = False,
    frozen_e: Mapping[str, float] | None = None,
    initial_delta: Mapping[str, float] | None = None,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
) -> dict[str, SteadyStatePoint]:
    """
    Equilibrium of the closed loop for fixed breaker states.

    `frozen_e` pins the DAPI voltage corrections (voltage consensus disabled)
    instead of solving for them.
    """

    comm = topology.comm if comm is None else comm
    ibrs = topology.ibr_ids
    n = len(ibrs)
    bank = ControllerBank(ibrs, params)
    gains = gated_gain_matrices(
        comm,
        ibrs,
        ibr_island_map(topology, breaker_states),
        phase_consensus_after_closure=phase_consensus_after_closure,
        disable_phase_consensus=disable_phase_consensus,
    )
    admittances = [
        build_admittance(topology, breaker_states, island)
        for island in electrical_islands(topology, breaker_states)
    ]
    loads = topology.loads()
    buses = [topology.bus_of(ibr) for ibr in ibrs]
    pinned = None if frozen_e is None else _np.array([frozen_e[ibr] for ibr in ibrs])

    def powers(delta: _np.ndarray, v: _np.ndarray) -> tuple[_np.ndarray, _np.ndarray]:
        sources = {
            ibr: SourceSetpoint(buses[k], float(v[k]), float(delta[k])) for k, ibr in enumerate(ibrs)
        }
        solution = NetworkSolution.merge(solve_island(adm, sources, loads) for adm in admittances)
        s = _np.array([solution.injections[ibr] for ibr in ibrs])
        return s.real, s.imag

    def residual(x: _np.ndarray) -> _np.ndarray:
        delta, omega_sec, e_sec, v = x.reshape(4, n)
        p, q = powers(delta, v)
        state = IbrState(delta, omega_sec, e_sec)
        d_omega = output_frequency(bank.params, state, p) - bank.params.omega_star
        if pinned is None:
            voltage = -bank.params.xi * (v - bank.params.v_star) - _laplacian(
                gains.b, bank.q_ratios(q, gains.b)
            )
        else:
            voltage = e_sec - pinned
        return _np.concatenate([
            d_omega - _laplacian(gains.d, delta),
            -d_omega - _laplacian(gains.a, omega_sec),
            voltage,
            v - output_voltage(bank.params, state, q),
        ])

    x = _np.concatenate([
        [0.0 if initial_delta is None else initial_delta[ibr] for ibr in ibrs],
        _np.zeros(n),
        _np.zeros(n) if pinned is None else pinned,
        bank.params.v_star,
    ])
    f = residual(x)
    norm = _np.max(_np.abs(f))

    iteration = 0
    while norm >= tol:
        if iteration == max_iter:
            raise SolverError(
                f"steady-state iteration did not converge in {max_iter} steps "
                f"(residual {norm:.3g})",
                island=ibrs,
            )
        iteration += 1

        jac = _np.empty((len(f), len(x)))
        for j in range(len(x)):
            h = 1e-7 * max(1.0, abs(x[j]))
            xh = x.copy()
            xh[j] += h
            jac[:, j] = (residual(xh) - f) / h
        dx = _np.linalg.lstsq(jac, -f, rcond=1e-10)[0]

        step = 1.0
        while True:
            x_new = x + step * dx
            f_new = residual(x_new)
            norm_new = _np.max(_np.abs(f_new))
            if norm_new < norm or step < 1e-4:
                break
            step *= 0.5
        x, f, norm = x_new, f_new, norm_new

    _logger.debug("steady state converged in %d iterations (residual %.3g)", iteration, norm)

    delta, omega_sec, e_sec, v = x.reshape(4, n)
    p, q = powers(delta, v)
    omega = output_frequency(bank.params, IbrState(delta, omega_sec, e_sec), p)
    return {
        ibr: SteadyStatePoint(
            float(p[k]),
            float(q[k]),
            float(omega[k] / (2 * _math.pi)),
            float(v[k]),
            float(delta[k]),
            float(omega_sec[k]),
            float(e_sec[k]),
        )
        for k, ibr in enumerate(ibrs)
    }
