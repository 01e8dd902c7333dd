#!/usr/bin/env python3

from __future__ import annotations as __annotations

import math

import pytest

from nmgsim.errors import TopologyError
from nmgsim.sync import (
    DwellTimer,
    SyncCheckConfig,
    SyncLatchState,
    SyncLogic,
    ieee1547_limits,
    latch_update,
    local_sync_check,
    reset_breaker,
    stage2_check,
)

from typing import TYPE_CHECKING  # isort: skip

if TYPE_CHECKING:
    from numpy.random import Generator as RNG

    from nmgsim.scenario import Scenario


CONFIG = SyncCheckConfig()


@pytest.mark.parametrize(
    ('d_f', 'd_v', 'phase', 'expected'),
    [
        (0.005, 0.005, 0.05, True),
        (0.02, 0.005, 0.05, False),
        (0.005, -0.02, 0.05, False),
        (0.005, 0.005, 0.2, False),
        (-0.0099, 0.0099, 0.0999, True),
        (0.01, 0.0, 0.0, False),
        (0.0, 0.0, math.inf, False),
    ],
)
def test_local_check_is_a_strict_three_way_and(
    d_f: float, d_v: float, phase: float, expected: bool
) -> None:

    assert local_sync_check(CONFIG, d_f, d_v, phase) is expected


def test_local_check_truth_table(deterministic_rng: RNG) -> None:

    for _ in range(1000):
        inside = deterministic_rng.integers(2, size=3).astype(bool)
        d_f = deterministic_rng.uniform(0, 0.01) if inside[0] else deterministic_rng.uniform(0.01, 1)
        d_v = deterministic_rng.uniform(0, 0.01) if inside[1] else deterministic_rng.uniform(0.01, 1)
        phase = deterministic_rng.uniform(0, 0.1) if inside[2] else deterministic_rng.uniform(0.1, 10)
        sign = deterministic_rng.choice([-1.0, 1.0])
        assert local_sync_check(CONFIG, sign * d_f, sign * d_v, phase) == bool(inside.all())


def test_stage2_requires_own_and_all_neighbors() -> None:

    assert stage2_check(True, [True, True])
    assert not stage2_check(False, [True, True])
    assert not stage2_check(True, [True, False])
    assert stage2_check(True, [])


def test_latch_is_set_dominant_and_holds() -> None:

    state = SyncLatchState(latched={'BRK': False})
    assert not latch_update(state, 'BRK', [True, False])
    assert latch_update(state, 'BRK', [True, True])
    assert state.latched['BRK']
    assert not latch_update(state, 'BRK', [False, False])
    assert state.latched['BRK']
    reset_breaker(state, 'BRK')
    assert not state.latched['BRK']


def test_latch_needs_at_least_one_input() -> None:

    state = SyncLatchState(latched={'BRK': False})
    assert not latch_update(state, 'BRK', [])
    assert not state.latched['BRK']


def test_unknown_breaker_raises() -> None:

    state = SyncLatchState(latched={})
    with pytest.raises(TopologyError, match="unknown breaker 'X'"):
        latch_update(state, 'X', [True])
    with pytest.raises(TopologyError, match="unknown breaker 'X'"):
        reset_breaker(state, 'X')


def test_no_closure_while_an_adjacent_input_is_false(nondeterministic_rng: RNG) -> None:

    rng = nondeterministic_rng
    for _ in range(10_000):
        n_adjacent = int(rng.integers(1, 5))
        state = SyncLatchState(latched={'BRK': False})
        for inputs in rng.random((int(rng.integers(1, 20)), n_adjacent)) < 0.8:
            was_latched = state.latched['BRK']
            closed = latch_update(state, 'BRK', inputs.tolist())
            if closed:
                assert not was_latched
                assert inputs.all()
            if was_latched:
                assert state.latched['BRK']
            else:
                assert state.latched['BRK'] == bool(inputs.all())


def test_simultaneous_inputs_latch_every_breaker_in_one_update(
    default_scenario: Scenario,
) -> None:

    topology = default_scenario.topology
    logic = SyncLogic(topology, CONFIG)
    good = {ibr: (0.0, 0.0, 0.0) for ibr in topology.ibr_ids}
    everyone_ok = {ibr: [True] for ibr in topology.ibr_ids}

    logic.evaluate(0.0, good, everyone_ok)
    assert logic.update_breakers() == list(topology.breaker_ids)
    assert logic.update_breakers() == []


def test_stage2_blocks_until_neighbors_agree(default_scenario: Scenario) -> None:

    topology = default_scenario.topology
    logic = SyncLogic(topology, CONFIG)
    good = {ibr: (0.0, 0.0, 0.0) for ibr in topology.ibr_ids}
    neighbor_oks = {ibr: [True] for ibr in topology.ibr_ids}
    neighbor_oks['IBR7'] = [False]

    logic.evaluate(0.0, good, neighbor_oks)
    assert not logic.state.stage2_ok['IBR7']
    closed = logic.update_breakers()
    assert 'BRK47' not in closed
    assert 'BRK12' in closed
    assert not logic.state.latched['BRK47']


def test_stage2_follows_the_exchanged_flags(default_scenario: Scenario) -> None:

    topology = default_scenario.topology
    logic = SyncLogic(topology, CONFIG)
    good = {ibr: (0.0, 0.0, 0.0) for ibr in topology.ibr_ids}
    bad = {ibr: (1.0, 0.0, 0.0) for ibr in topology.ibr_ids}
    everyone_ok = {ibr: [True] for ibr in topology.ibr_ids}

    # live checks pass but the last exchange still carried IBR3 as not ready
    snapshot = {ibr: ibr != 'IBR3' for ibr in topology.ibr_ids}
    logic.evaluate(0.0, good, everyone_ok, snapshot)
    assert logic.state.local_ok['IBR3']
    assert not logic.state.stage2_ok['IBR3']
    assert 'BRK23' not in logic.update_breakers()

    # an all-true exchange closes every breaker in the same update
    logic = SyncLogic(topology, CONFIG)
    logic.evaluate(0.0, bad, everyone_ok, dict.fromkeys(topology.ibr_ids, True))
    assert not any(logic.state.local_ok.values())
    assert all(logic.state.stage2_ok.values())
    assert logic.update_breakers() == list(topology.breaker_ids)


def test_dwell_timer() -> None:

    timer = DwellTimer(0.5)
    assert not timer.update('A', True, 0.0)
    assert not timer.update('A', True, 0.4)
    assert timer.update('A', True, 0.5)
    assert not timer.update('A', False, 0.6)
    assert not timer.update('A', True, 0.7)
    assert DwellTimer(0.0).update('A', True, 3.0)


def test_ieee1547_table() -> None:

    assert ieee1547_limits(300.0) == (500.0, 0.3, 0.10, 20.0)
    assert ieee1547_limits(1000.0).freq_hz == 0.2
    assert ieee1547_limits(5000.0).phase_deg == 10.0
    config = SyncCheckConfig.from_ieee1547(1000.0)
    assert (config.freq_tol, config.volt_tol, config.phase_tol) == (0.2, 0.05, 15.0)
    with pytest.raises(ValueError, match="rating must be positive"):
        ieee1547_limits(0.0)


def test_config_validation() -> None:

    with pytest.raises(ValueError, match="freq_tol must be positive"):
        SyncCheckConfig(freq_tol=0.0)
    with pytest.raises(ValueError, match="dwell must not be negative"):
        SyncCheckConfig(dwell=-1.0)


if __name__ == '__main__':
    pytest.main()
