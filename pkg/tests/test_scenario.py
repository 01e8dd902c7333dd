#!/usr/bin/env python3

from __future__ import annotations as __annotations

import math

import pytest

from nmgsim.errors import ScenarioError
from nmgsim.scenario import (
    default_scenario_path,
    format_scenario,
    load_scenario,
    parse_scenario,
)
from nmgsim.topology import LoadModel

from typing import TYPE_CHECKING  # isort: skip

if TYPE_CHECKING:
    from collections.abc import Callable
    from pathlib import Path

    from nmgsim.scenario import Scenario


def test_default_scenario_parses(default_scenario: Scenario) -> None:

    topology = default_scenario.topology
    assert len(topology.ibr_ids) == 7
    assert topology.comm.period == 1.0
    assert topology.comm.phase_every_step
    assert topology.v_nominal == pytest.approx(480 * math.sqrt(2) / math.sqrt(3))
    for params in default_scenario.params.values():
        assert params.xi == 0.1
        assert params.omega_star == pytest.approx(2 * math.pi * 60.0)
        assert params.m == pytest.approx(2 * math.pi * 1e-6)
        assert params.n == pytest.approx(48 * math.sqrt(2) / math.sqrt(3) / 1e6)
    sim = default_scenario.sim
    assert (sim.dt_control, sim.duration, sim.integrator) == (0.0111, 20.0, 'rk4')
    assert sim.soft_start.ramp_duration == 0.5
    assert sim.soft_start.target == topology.v_nominal
    assert default_scenario.sync.phase_tol == 0.1


def test_default_breakers_are_gated_by_both_ends(default_scenario: Scenario) -> None:

    topology = default_scenario.topology
    assert topology.breaker('BRK47').adjacent_ibrs == frozenset({'IBR4', 'IBR7'})
    assert topology.breaker('BRK61').adjacent_ibrs == frozenset({'IBR1', 'IBR6'})


def test_degrees_are_converted_to_radians(default_scenario: Scenario) -> None:

    assert default_scenario.initial_states['IBR1'].delta == pytest.approx(math.radians(2.0))
    assert default_scenario.initial_states['IBR4'].delta == pytest.approx(math.radians(-2.0))
    assert default_scenario.initial_states['IBR7'].omega_sec == 0.0


def test_empty_file_is_missing_sections() -> None:

    with pytest.raises(ScenarioError, match="missing section: sim") as info:
        parse_scenario('')
    assert "missing section: comm" in info.value.errors
    assert "missing section: ibr" in info.value.errors


def test_syntax_error_carries_line_number(two_mg_text: str) -> None:

    broken = two_mg_text.replace('k = 1.0', 'k = = 1.0', 1)
    line = broken.splitlines().index('k = = 1.0') + 1
    with pytest.raises(ScenarioError, match="syntax error") as info:
        parse_scenario(broken)
    assert info.value.line == line


def test_negative_droop_gain_names_the_key(make_scenario: Callable[..., Scenario]) -> None:

    with pytest.raises(ScenarioError, match=r"ibr\.IBR1\.m_hz_per_w: must be positive"):
        make_scenario({'m_hz_per_w = 1e-06\nn_v_per_var': 'm_hz_per_w = -1e-06\nn_v_per_var'})


def test_semantic_errors_are_aggregated(make_scenario: Callable[..., Scenario]) -> None:

    with pytest.raises(ScenarioError) as info:
        make_scenario({
            'kappa = 0.1\nxi = 0.1\ndelta0_deg = 1.0': 'kappa = 0.0\nxi = 0.1\ndelta0_deg = 1.0',
            'r_ohm = 0.1': 'r_ohm = 0.1\ncolour = "red"',
        })
    errors = info.value.errors
    assert "ibr.IBR1.kappa: must be positive, got 0.0" in errors
    assert "line.L12: unknown key 'colour'" in errors


def test_unknown_section_and_missing_key(make_scenario: Callable[..., Scenario]) -> None:

    with pytest.raises(ScenarioError, match="unknown section 'plots'"):
        make_scenario(extra='\n[plots]\nwidth = 3\n')
    with pytest.raises(ScenarioError, match="sim: missing key 'integrator'"):
        make_scenario({'integrator = "rk4"\n': ''})


def test_dangling_bus_reference_is_reported(make_scenario: Callable[..., Scenario]) -> None:

    with pytest.raises(ScenarioError, match="names unknown bus 'MG9'"):
        make_scenario({'to = "MG2"': 'to = "MG9"'})


def test_unknown_initially_closed_breaker(make_scenario: Callable[..., Scenario]) -> None:

    with pytest.raises(ScenarioError, match="sim.initially_closed: unknown breaker 'BRK99'"):
        make_scenario({'duration_s = 5.0': 'duration_s = 5.0\ninitially_closed = ["BRK99"]'})


def test_v_nominal_needed_when_references_differ(make_scenario: Callable[..., Scenario]) -> None:

    text_change = {'p_star_w = 255000.0': 'p_star_w = 255000.0\nv_star_v_typo = 1.0'}
    with pytest.raises(ScenarioError, match="unknown key 'v_star_v_typo'"):
        make_scenario(text_change)

    scenario = make_scenario({
        'v_star_v = 391.9183588453085\nm_hz_per_w = 1e-06\nn_v_per_var = 3.919183588453085e-05\n'
        'p_star_w = 255000.0': 'v_star_v = 400.0\nm_hz_per_w = 1e-06\n'
        'n_v_per_var = 3.919183588453085e-05\np_star_w = 255000.0',
        'duration_s = 5.0': 'duration_s = 5.0\nv_nominal_v = 391.9183588453085',
    })
    assert scenario.params['IBR2'].v_star == 400.0
    assert scenario.topology.v_nominal == 391.9183588453085


def test_load_model_and_adjacency_override(make_scenario: Callable[..., Scenario]) -> None:

    scenario = make_scenario({
        'load_q_var = 70000.0': 'load_q_var = 70000.0\nload_model = "constant-power"',
        'breaker = "BRK12"': 'breaker = "BRK12"\nadjacent_ibrs = ["IBR1"]',
    })
    assert scenario.topology.bus('MG2').load.model is LoadModel.CONSTANT_POWER
    assert scenario.topology.breaker('BRK12').adjacent_ibrs == frozenset({'IBR1'})


@pytest.mark.parametrize('scenario_name', ['two_mg_scenario', 'default_scenario'])
def test_format_then_parse_is_identity(scenario_name: str, request: pytest.FixtureRequest) -> None:

    scenario: Scenario = request.getfixturevalue(scenario_name)
    assert parse_scenario(format_scenario(scenario)) == scenario


def test_round_trip_keeps_overrides(make_scenario: Callable[..., Scenario]) -> None:

    scenario = make_scenario({
        'breaker = "BRK12"': 'breaker = "BRK12"\nadjacent_ibrs = ["IBR2"]',
        'phase_every_step = true': 'phase_every_step = true\ndelay_s = 0.2',
        'duration_s = 5.0': 'duration_s = 5.0\ninitially_closed = ["BRK12"]',
    }, extra='\n[sync]\nfreq_tol_hz = 0.3\ndwell_s = 0.1\n')
    assert parse_scenario(format_scenario(scenario)) == scenario


def test_load_scenario_from_path(tmp_path: Path, two_mg_text: str) -> None:

    path = tmp_path / 'two.toml'
    path.write_text(two_mg_text, encoding='utf-8')
    assert load_scenario(path) == parse_scenario(two_mg_text)
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / 'missing.toml')
    assert default_scenario_path().name == 'default_7mg.toml'


if __name__ == '__main__':
    pytest.main()
