#!/usr/bin/env python3

from __future__ import annotations as _annotations

from functools import cache as _cache
from importlib import import_module as _import_module

import numpy as _np

from .errors import SolverError

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from .ifc import Derivative, Integrator


METHODS = ('explicit-euler', 'rk4')


@_cache
def get_integrator(method: str) -> type[Integrator]:
    """Resolve an integration scheme by name, e.g. `'rk4'` or `'explicit-euler'`."""

    module_name = method.replace('-', '_')
    if not module_name.isidentifier():
        raise ValueError(f"invalid integrator name {method!r}")

    try:
        module = _import_module('.' + module_name, package='nmgsim.integrators')
    except ImportError:
        raise ValueError(f"cannot find module for integrator {method!r}") from None

    try:
        return getattr(module, module_name)
    except AttributeError:
        raise ValueError(f"cannot find class for integrator {method!r}") from None


def integrate(derivative: Derivative, x: _np.ndarray, dt: float, method: str) -> _np.ndarray:
    """Advance `x` by one step of `dt`; raises `SolverError` on a non-finite derivative."""

    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt!r}")

    def checked(tau: float, y: _np.ndarray) -> _np.ndarray:
        dy = _np.asarray(derivative(tau, y), dtype=float)
        if not _np.all(_np.isfinite(dy)):
            raise SolverError(f"non-finite derivative at step offset {tau:.6g} s")
        return dy

    return get_integrator(method).step(checked, _np.asarray(x, dtype=float), dt)
