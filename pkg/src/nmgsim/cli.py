#!/usr/bin/env python3

"""
Command line interface.

    nmgsim [-v|-q] simulate [--scenario PATH] --out DIR [overrides...] [--plots]
    nmgsim [-v|-q] steady-state [--scenario PATH] [--closed]
    nmgsim [-v|-q] validate [--scenario PATH]

Exit status is 0 on success, 1 for invalid input and 2 when a solver fails.
"""

from __future__ import annotations as _annotations

import argparse as _argparse
import json as _json
import logging as _logging
import math as _math
import sys as _sys

from pathlib import Path as _Path

from . import __version__
from .engine import Simulation
from .errors import NmgError, SolverError
from .metrics import summarize
from .scenario import default_scenario_path, load_scenario
from .steady_state import closed_configuration, solve_steady_state
from .traces import write_events, write_traces

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Sequence

    from .metrics import RunSummary
    from .scenario import Scenario


_logger = _logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SOLVER = 2


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise _argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (_math.isfinite(value) and value > 0):
        raise _argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise _argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise _argparse.ArgumentTypeError(f"must be at least 1, got {text!r}")
    return value


def build_parser() -> _argparse.ArgumentParser:
    parser = _argparse.ArgumentParser(
        prog='nmgsim',
        description="Black-start and restoration simulator for networks of microgrids.",
    )
    parser.add_argument('-V', '--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='count', default=0, help="more log output")
    parser.add_argument('-q', '--quiet', action='count', default=0, help="less log output")

    scenario = _argparse.ArgumentParser(add_help=False)
    scenario.add_argument(
        '--scenario',
        type=_Path,
        default=None,
        help="scenario file (default: the packaged 7-microgrid scenario)",
    )

    commands = parser.add_subparsers(dest='command', required=True, metavar='<command>')

    simulate = commands.add_parser(
        'simulate', parents=[scenario], help="run a scenario and write traces"
    )
    simulate.add_argument('--out', type=_Path, required=True, help="output directory")
    simulate.add_argument('--duration', type=_positive_float, help="simulated time (s)")
    simulate.add_argument('--dt', type=_positive_float, help="control step (s)")
    simulate.add_argument('--record-every', type=_positive_int, help="trace decimation")
    simulate.add_argument(
        '--disable-dapi-voltage', action='store_true', help="freeze the voltage corrections"
    )
    simulate.add_argument(
        '--disable-phase-consensus', action='store_true', help="zero all phase gains"
    )
    simulate.add_argument('--plots', action='store_true', help="also write SVG plots")

    steady = commands.add_parser(
        'steady-state', parents=[scenario], help="solve the closed-loop equilibrium"
    )
    steady.add_argument(
        '--closed', action='store_true', help="with every breaker closed and setpoints averaged"
    )

    commands.add_parser('validate', parents=[scenario], help="check a scenario file")

    return parser


def configure_logging(verbosity: int) -> None:
    level = min(max(_logging.WARNING - 10 * verbosity, _logging.DEBUG), _logging.CRITICAL)
    _logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')


def _load(path: _Path | None) -> Scenario:
    return load_scenario(default_scenario_path() if path is None else path)


def _print_summary(summary: RunSummary) -> None:
    for name, value in summary.as_dict().items():
        print(f"{name:>24}: {value}")


def cmd_simulate(args: _argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    overrides = {
        name: value
        for name, value in (
            ('duration', args.duration),
            ('dt_control', args.dt),
            ('record_every', args.record_every),
        )
        if value is not None
    }
    if args.disable_dapi_voltage:
        overrides['disable_dapi_voltage'] = True
    if args.disable_phase_consensus:
        overrides['disable_phase_consensus'] = True
    if overrides:
        scenario = scenario.with_sim(**overrides)

    topology = scenario.topology
    simulation = Simulation(
        topology,
        scenario.params,
        scenario.sim,
        scenario.sync,
        initial_states=scenario.initial_states,
    )
    result = simulation.run()

    out: _Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    traces_path = write_traces(
        result.traces,
        out / 'traces.csv',
        topology.ibr_ids,
        topology.breaker_ids,
        event_times=(event.t for event in result.events),
    )
    write_events(result.events, out / 'events.csv')

    summary = summarize(result.traces, result.events, result.final.params)
    (out / 'summary.json').write_text(
        _json.dumps(summary.as_dict(), indent=2) + '\n', encoding='utf-8'
    )
    _logger.info("wrote %s, events.csv and summary.json", traces_path)

    if args.plots:
        from .plots import emit_plots
        emit_plots(traces_path, out / 'plots')

    _print_summary(summary)
    return EXIT_OK


def cmd_steady_state(args: _argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    topology = scenario.topology
    if args.closed:
        breakers, params = closed_configuration(topology, scenario.params)
    else:
        # the configuration a run starts from
        simulation = Simulation(topology, scenario.params, scenario.sim, scenario.sync)
        breakers, params = simulation.breaker_states, simulation.params

    points = solve_steady_state(
        topology,
        params,
        None,
        breakers,
        phase_consensus_after_closure=scenario.sim.phase_consensus_after_closure,
        disable_phase_consensus=scenario.sim.disable_phase_consensus,
        initial_delta={ibr: state.delta for ibr, state in scenario.initial_states.items()},
    )

    print(
        f"{'ibr':<8} {'P (W)':>14} {'Q (VAr)':>14} {'f (Hz)':>14} {'V (V)':>12} "
        f"{'delta (deg)':>12} {'Omega':>12} {'e (V)':>12}"
    )
    for ibr, point in points.items():
        print(
            f"{ibr:<8} {point.p:>14.6f} {point.q:>14.6f} {point.f:>14.9f} {point.v:>12.6f} "
            f"{_math.degrees(point.delta):>12.6f} {point.omega_sec:>12.6e} {point.e_sec:>12.6f}"
        )
    return EXIT_OK


def cmd_validate(args: _argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    topology = scenario.topology
    print(
        f"ok: {len(topology.ibr_ids)} IBRs, {len(topology.bus_ids)} buses, "
        f"{len(topology.lines)} lines, {len(topology.breaker_ids)} breakers, "
        f"{len(topology.comm.links())} comm links"
    )
    return EXIT_OK


COMMANDS = {
    'simulate': cmd_simulate,
    'steady-state': cmd_steady_state,
    'validate': cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose - args.quiet)

    try:
        return COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_SOLVER
    except (NmgError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INVALID


if __name__ == '__main__':
    raise SystemExit(main())
