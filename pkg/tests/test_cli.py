#!/usr/bin/env python3

from __future__ import annotations as __annotations

import json
import logging

import pytest

from nmgsim import __version__
from nmgsim.cli import EXIT_INVALID, EXIT_OK, configure_logging, main

from typing import TYPE_CHECKING  # isort: skip

if TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture()
def two_mg_file(tmp_path: Path, two_mg_text: str) -> Path:

    path = tmp_path / 'two.toml'
    path.write_text(two_mg_text, encoding='utf-8')
    return path


def test_version(capsys: pytest.CaptureFixture[str]) -> None:

    with pytest.raises(SystemExit) as info:
        main(['--version'])
    assert info.value.code == 0
    assert capsys.readouterr().out.strip() == f'nmgsim {__version__}'


def test_command_is_required(capsys: pytest.CaptureFixture[str]) -> None:

    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    assert 'required' in capsys.readouterr().err


def test_validate_default_scenario(capsys: pytest.CaptureFixture[str]) -> None:

    assert main(['validate']) == EXIT_OK
    assert capsys.readouterr().out.strip() == (
        "ok: 7 IBRs, 7 buses, 7 lines, 7 breakers, 7 comm links"
    )


def test_invalid_scenario_exits_with_one(
    tmp_path: Path, two_mg_text: str, capsys: pytest.CaptureFixture[str]
) -> None:

    path = tmp_path / 'bad.toml'
    path.write_text(two_mg_text.replace('kappa = 0.1', 'kappa = -0.1'), encoding='utf-8')
    assert main(['validate', '--scenario', str(path)]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert err.startswith('error: ')
    assert 'ibr.IBR1.kappa: must be positive' in err

    assert main(['validate', '--scenario', str(tmp_path / 'nowhere.toml')]) == EXIT_INVALID
    assert 'cannot read' in capsys.readouterr().err


def test_bad_override_is_a_usage_error(tmp_path: Path) -> None:

    with pytest.raises(SystemExit) as info:
        main(['simulate', '--out', str(tmp_path), '--dt', '-1'])
    assert info.value.code == 2


def test_simulate_writes_outputs(
    two_mg_file: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:

    out = tmp_path / 'run'
    argv = ['-q', 'simulate', '--scenario', str(two_mg_file), '--out', str(out),
            '--duration', '4.5', '--record-every', '10', '--plots']
    assert main(argv) == EXIT_OK

    traces = (out / 'traces.csv').read_text(encoding='utf-8').splitlines()
    assert traces[0].startswith('t,IBR1.P,IBR1.Q,')
    assert traces[0].endswith(',BRK12.latched')
    assert len(traces) > 10

    events = (out / 'events.csv').read_text(encoding='utf-8').splitlines()
    assert events[0] == 't,kind,payload'
    assert any(',closure,' in line for line in events[1:])

    summary = json.loads((out / 'summary.json').read_text(encoding='utf-8'))
    assert summary['closures'] == 1
    assert 1.0 < summary['first_closure'] < 4.0
    assert summary['same_step']

    assert sorted(path.name for path in (out / 'plots').iterdir()) == [
        'active_power.svg', 'frequency.svg', 'phase.svg', 'reactive_power.svg', 'voltage.svg',
    ]
    assert 'closures' in capsys.readouterr().out


def test_simulate_without_phase_consensus_never_closes(two_mg_file: Path, tmp_path: Path) -> None:

    out = tmp_path / 'run'
    argv = ['simulate', '--scenario', str(two_mg_file), '--out', str(out),
            '--duration', '2.5', '--disable-phase-consensus']
    assert main(argv) == EXIT_OK
    summary = json.loads((out / 'summary.json').read_text(encoding='utf-8'))
    assert summary['closures'] == 0
    assert summary['first_closure'] is None
    assert not (out / 'plots').exists()


def test_steady_state_closed(two_mg_file: Path, capsys: pytest.CaptureFixture[str]) -> None:

    assert main(['steady-state', '--scenario', str(two_mg_file), '--closed']) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split()[:3] == ['ibr', 'P', '(W)']
    assert [line.split()[0] for line in lines[1:]] == ['IBR1', 'IBR2']
    for line in lines[1:]:
        assert float(line.split()[3]) == pytest.approx(60.0, abs=1e-6)


def test_steady_state_islanded(two_mg_file: Path, capsys: pytest.CaptureFixture[str]) -> None:

    assert main(['steady-state', '--scenario', str(two_mg_file)]) == EXIT_OK
    rows = capsys.readouterr().out.splitlines()[1:]
    # each island serves its own load
    assert float(rows[0].split()[1]) == pytest.approx(250e3, rel=0.05)
    assert float(rows[1].split()[1]) == pytest.approx(255e3, rel=0.05)


@pytest.mark.parametrize(
    ('verbosity', 'level'),
    [(-2, logging.CRITICAL), (0, logging.WARNING), (1, logging.INFO), (5, logging.DEBUG)],
)
def test_configure_logging(verbosity: int, level: int, monkeypatch: pytest.MonkeyPatch) -> None:

    seen = {}
    monkeypatch.setattr(logging, 'basicConfig', lambda **kwargs: seen.update(kwargs))
    configure_logging(verbosity)
    assert seen['level'] == level


if __name__ == '__main__':
    pytest.main()
