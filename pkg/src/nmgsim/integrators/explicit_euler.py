#!/usr/bin/env python3

from __future__ import annotations as _annotations

from ..ifc import Integrator

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    import numpy as np

    from ..ifc import Derivative


class explicit_euler(Integrator):

    name = 'explicit-euler'
    order = 1
    stages = 1

    @classmethod
    def step(cls, derivative: Derivative, x: np.ndarray, dt: float) -> np.ndarray:
        return x + dt * derivative(0.0, x)
