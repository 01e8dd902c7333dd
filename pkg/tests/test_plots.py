#!/usr/bin/env python3

from __future__ import annotations as __annotations

import numpy as np
import pytest

from nmgsim.engine import EventKind, run_scenario
from nmgsim.errors import TraceFormatError
from nmgsim.plots import FAMILIES, closure_times, emit_plots
from nmgsim.traces import trace_columns, write_traces

from typing import TYPE_CHECKING  # isort: skip

if TYPE_CHECKING:
    from pathlib import Path

    from nmgsim.scenario import Scenario


def test_closure_times_are_rising_edges() -> None:

    header = ['t', 'BRK12.latched', 'BRK23.latched']
    data = np.array([
        [0.0, 0, 0],
        [0.1, 1, 0],
        [0.2, 1, 1],
        [0.3, 0, 1],
        [0.4, 1, 1],
    ], dtype=float)
    assert closure_times(header, data) == [0.1, 0.2, 0.4]
    assert closure_times(header, data[:0]) == []


def test_plots_of_a_two_microgrid_run(two_mg_scenario: Scenario, tmp_path: Path) -> None:

    scenario = two_mg_scenario.with_sim(duration=4.5, record_every=5)
    topology = scenario.topology
    result = run_scenario(
        topology, scenario.params, scenario.sim, scenario.sync,
        initial_states=scenario.initial_states,
    )
    assert result.events.of_kind(EventKind.CLOSURE)
    csv_path = write_traces(
        result.traces, tmp_path / 'traces.csv', topology.ibr_ids, topology.breaker_ids
    )

    paths = emit_plots(csv_path, tmp_path / 'plots')
    assert [path.name for path in paths] == [f'{family.name}.svg' for family in FAMILIES]
    for path in paths:
        text = path.read_text(encoding='utf-8')
        assert '<svg' in text


def test_header_only_trace_gives_empty_axes(tmp_path: Path) -> None:

    csv_path = write_traces([], tmp_path / 'traces.csv', ('IBR1',), ('BRK12',))
    paths = emit_plots(csv_path, tmp_path / 'plots')
    assert len(paths) == len(FAMILIES)
    assert all(path.stat().st_size > 0 for path in paths)


def test_missing_column_is_an_error(tmp_path: Path) -> None:

    columns = [c for c in trace_columns(('IBR1',), ()) if c != 'IBR1.V']
    csv_path = tmp_path / 'traces.csv'
    csv_path.write_text(','.join(columns) + '\n', encoding='utf-8')
    with pytest.raises(TraceFormatError, match="missing column 'IBR1.V'"):
        emit_plots(csv_path, tmp_path / 'plots')
    assert not (tmp_path / 'plots').exists()


if __name__ == '__main__':
    pytest.main()
