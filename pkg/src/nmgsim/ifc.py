#!/usr/bin/env python3

from __future__ import annotations as _annotations

from abc import ABC as _ABC, abstractmethod as _abstractmethod

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Callable

    import numpy as np

    Derivative = Callable[[float, np.ndarray], np.ndarray]


class Integrator(_ABC):
    """
    Fixed-step explicit integration scheme.

    Implementations live in `nmgsim.integrators`, one module per scheme with a
    class of the same name, and are looked up by `nmgsim.integrate`.
    """

    name: str
    order: int
    stages: int

    @classmethod
    @_abstractmethod
    def step(cls, derivative: Derivative, x: np.ndarray, dt: float) -> np.ndarray:
        """
        Advance `x` by `dt`.

        `derivative(tau, x)` receives the offset `tau` into the step, not the
        absolute time.
        """
        raise NotImplementedError
