#!/usr/bin/env python3

from __future__ import annotations as __annotations

import sys as __sys

from pathlib import Path as __Path

import numpy.random as __npr
import pytest

from typing import TYPE_CHECKING  # isort: skip

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.random import Generator as RNG
    from pytest import FixtureRequest

    from nmgsim.scenario import Scenario

__sys.path.insert(0, str((__Path(__file__).parent / '..' / 'src').resolve()))

from nmgsim.scenario import default_scenario_path, load_scenario, parse_scenario  # noqa: E402


TWO_MG_TOML = '''\
[sim]
dt_control_s = 0.0111
duration_s = 5.0
integrator = "rk4"
soft_start_ramp_s = 0.0

[comm]
period_s = 1.0
phase_every_step = true

[ibr.IBR1]
bus = "MG1"
omega_star_hz = 60.0
v_star_v = 391.9183588453085
m_hz_per_w = 1e-06
n_v_per_var = 3.919183588453085e-05
p_star_w = 250000.0
q_star_var = 60000.0
k = 1.0
kappa = 0.1
xi = 0.1
delta0_deg = 1.0

[ibr.IBR2]
bus = "MG2"
omega_star_hz = 60.0
v_star_v = 391.9183588453085
m_hz_per_w = 1e-06
n_v_per_var = 3.919183588453085e-05
p_star_w = 255000.0
q_star_var = 70000.0
k = 1.0
kappa = 0.1
xi = 0.1
delta0_deg = -1.0

[bus.MG1]
load_p_w = 250000.0
load_q_var = 60000.0

[bus.MG2]
load_p_w = 255000.0
load_q_var = 70000.0

[line.L12]
from = "MG1"
to = "MG2"
r_ohm = 0.1
x_ohm = 0.3
breaker = "BRK12"

[[commlink]]
i = "IBR1"
j = "IBR2"
a = 1.0
b = 1.0
d = 1.0
'''


@pytest.fixture(scope='session')
def nondeterministic_rng() -> RNG:

    return __npr.default_rng()


@pytest.fixture(scope='function', params=[67890])
def deterministic_rng(request: FixtureRequest) -> RNG:

    return __npr.default_rng(request.param)


@pytest.fixture(scope='session')
def default_scenario() -> Scenario:

    return load_scenario(default_scenario_path())


@pytest.fixture(scope='session')
def two_mg_text() -> str:

    return TWO_MG_TOML


@pytest.fixture(scope='function')
def two_mg_scenario() -> Scenario:

    return parse_scenario(TWO_MG_TOML)


@pytest.fixture(scope='session')
def make_scenario() -> Callable[..., Scenario]:
    """
    Build a variant of the 2-MG scenario by textual substitution.

    Example:
        ```
        def test_foo(make_scenario):
            scenario = make_scenario({'duration_s = 5.0': 'duration_s = 1.0'})
        ```
    """

    def _make(replacements: dict[str, str] | None = None, extra: str = '') -> Scenario:
        text = TWO_MG_TOML
        for old, new in (replacements or {}).items():
            assert old in text, old
            text = text.replace(old, new)
        return parse_scenario(text + extra)

    return _make
