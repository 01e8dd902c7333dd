#!/usr/bin/env python3

from __future__ import annotations as _annotations

from ..ifc import Integrator

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    import numpy as np

    from ..ifc import Derivative


class rk4(Integrator):
    """Classical fourth-order Runge-Kutta."""

    name = 'rk4'
    order = 4
    stages = 4

    @classmethod
    def step(cls, derivative: Derivative, x: np.ndarray, dt: float) -> np.ndarray:
        half = 0.5 * dt
        k1 = derivative(0.0, x)
        k2 = derivative(half, x + half * k1)
        k3 = derivative(half, x + half * k2)
        k4 = derivative(dt, x + dt * k3)
        return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
