#!/usr/bin/env python3

"""
Scenario files.

A scenario is a TOML document with the sections `[sim]`, `[comm]`, `[sync]`,
`[ibr.<id>]`, `[bus.<id>]`, `[line.<id>]` and an array of `[[commlink]]`
tables. Every physical key carries its unit in the name; frequencies are
given in Hz and converted to rad/s here, angles are given in degrees.

`parse_scenario()` reports a syntax error with its line number, and all
semantic problems of a file at once. `format_scenario()` writes a scenario
back in the same grammar, such that parsing the output reproduces the
parsed objects exactly.
"""

from __future__ import annotations as _annotations

import json as _json
import logging as _logging
import math as _math
import re as _re
import tomllib as _tomllib

from dataclasses import dataclass as _dataclass, replace as _replace
from importlib.resources import files as _files
from pathlib import Path as _Path

from .controller import IbrParams, IbrState, SoftStartProfile, validate_params
from .engine import SimConfig
from .errors import ScenarioError
from .sync import SyncCheckConfig
from .topology import (
    BreakerSpec,
    CommGraph,
    LoadModel,
    LoadSpec,
    MgBus,
    NmgTopology,
    TieLine,
    default_adjacent_ibrs,
    validate_topology,
)

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Callable
    from os import PathLike
    from typing import Any


_logger = _logging.getLogger(__name__)

TWO_PI = 2 * _math.pi
DEG = _math.pi / 180

_REQUIRED = object()
_BARE_KEY = _re.compile(r'[A-Za-z0-9_-]+')


@_dataclass(frozen=True)
class Scenario:
    topology: NmgTopology
    params: dict[str, IbrParams]
    initial_states: dict[str, IbrState]
    sim: SimConfig
    sync: SyncCheckConfig

    def with_sim(self, **changes: Any) -> Scenario:
        return _replace(self, sim=_replace(self.sim, **changes))


def _positive(value: float) -> str | None:
    return None if value > 0 else "must be positive"


def _non_negative(value: float) -> str | None:
    return None if value >= 0 else "must not be negative"


class _Table:
    """Typed, checked access to one TOML table; problems go to the shared error list."""

    def __init__(self, name: str, table: object, errors: list[str]) -> None:
        self.name = name
        self.errors = errors
        if not isinstance(table, dict):
            errors.append(f"{name}: expected a table")
            table = {}
        self.table = table
        self.seen: set[str] = set()

    def get(
        self,
        key: str,
        kind: str,
        default: object = _REQUIRED,
        check: Callable[[Any], str | None] | None = None,
    ) -> Any:
        self.seen.add(key)
        if key not in self.table:
            if default is _REQUIRED:
                self.errors.append(f"{self.name}: missing key {key!r}")
            return default

        value = self.table[key]
        match kind:
            case 'float':
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
                value = float(value) if ok else value
                ok = ok and not _math.isnan(value)
            case 'int':
                ok = isinstance(value, int) and not isinstance(value, bool)
            case 'bool':
                ok = isinstance(value, bool)
            case 'str':
                ok = isinstance(value, str)
            case 'strings':
                ok = isinstance(value, list) and all(isinstance(v, str) for v in value)
            case _:
                raise AssertionError(kind)
        if not ok:
            self.errors.append(f"{self.name}.{key}: expected {kind}, got {value!r}")
            return default if default is not _REQUIRED else None

        if check is not None and (problem := check(value)) is not None:
            self.errors.append(f"{self.name}.{key}: {problem}, got {value!r}")
        return value

    def finish(self) -> None:
        for key in self.table:
            if key not in self.seen:
                self.errors.append(f"{self.name}: unknown key {key!r}")


def _syntax_line(exc: _tomllib.TOMLDecodeError) -> int | None:
    line = getattr(exc, 'lineno', None)
    if line is None and (match := _re.search(r'at line (\d+)', str(exc))):
        line = int(match.group(1))
    return line


def parse_scenario(text: str) -> Scenario:

    try:
        doc = _tomllib.loads(text)
    except _tomllib.TOMLDecodeError as exc:
        line = _syntax_line(exc)
        raise ScenarioError(f"syntax error: {exc}", line=line) from None

    errors: list[str] = []
    for section in ('sim', 'comm', 'ibr'):
        if section not in doc:
            errors.append(f"missing section: {section}")
    for section in doc:
        if section not in ('sim', 'comm', 'sync', 'ibr', 'bus', 'line', 'commlink'):
            errors.append(f"unknown section {section!r}")
    if errors:
        raise ScenarioError(errors)

    sim = _Table('sim', doc['sim'], errors)
    dt = sim.get('dt_control_s', 'float', check=_positive)
    duration = sim.get('duration_s', 'float', check=_non_negative)
    integrator = sim.get('integrator', 'str')
    ramp = sim.get('soft_start_ramp_s', 'float', check=_non_negative)
    record_every = sim.get('record_every', 'int', 1, check=_positive)
    v_nominal = sim.get('v_nominal_v', 'float', None, check=_positive)
    initially_closed = sim.get('initially_closed', 'strings', [])
    after_closure = sim.get('phase_consensus_after_closure', 'bool', False)
    no_dapi_voltage = sim.get('disable_dapi_voltage', 'bool', False)
    no_phase = sim.get('disable_phase_consensus', 'bool', False)
    sim.finish()

    comm = _Table('comm', doc['comm'], errors)
    period = comm.get('period_s', 'float', check=_positive)
    delay = comm.get('delay_s', 'float', 0.0, check=_non_negative)
    phase_every_step = comm.get('phase_every_step', 'bool', False)
    comm.finish()

    sync = _Table('sync', doc.get('sync', {}), errors)
    freq_tol = sync.get('freq_tol_hz', 'float', 0.01, check=_positive)
    volt_tol = sync.get('volt_tol_frac', 'float', 0.01, check=_positive)
    phase_tol = sync.get('phase_tol_deg', 'float', 0.1, check=_positive)
    dwell = sync.get('dwell_s', 'float', 0.0, check=_non_negative)
    sync.finish()

    bus_tables = doc.get('bus', {})
    buses: dict[str, LoadSpec | None] = {}
    for bus_id, table in (bus_tables.items() if isinstance(bus_tables, dict) else ()):
        bus = _Table(f'bus.{bus_id}', table, errors)
        p = bus.get('load_p_w', 'float', None, check=_non_negative)
        q = bus.get('load_q_var', 'float', 0.0)
        model = bus.get('load_model', 'str', LoadModel.CONSTANT_IMPEDANCE.value)
        bus.finish()
        if model not in tuple(LoadModel):
            errors.append(f"bus.{bus_id}.load_model: unknown load model {model!r}")
            model = LoadModel.CONSTANT_IMPEDANCE
        if p is None and 'load_q_var' in bus.table:
            errors.append(f"bus.{bus_id}: load_q_var given without load_p_w")
        buses[bus_id] = None if p is None else LoadSpec(p, q, LoadModel(model))

    ibr_tables = doc['ibr'] if isinstance(doc['ibr'], dict) else {}
    if not ibr_tables:
        errors.append("ibr: expected at least one [ibr.<id>] table")
    params: dict[str, IbrParams] = {}
    initial: dict[str, IbrState] = {}
    ibr_bus: dict[str, str] = {}
    for ibr_id, table in ibr_tables.items():
        ibr = _Table(f'ibr.{ibr_id}', table, errors)
        bus_id = ibr.get('bus', 'str')
        f_star = ibr.get('omega_star_hz', 'float', check=_positive)
        v_star = ibr.get('v_star_v', 'float', check=_positive)
        m = ibr.get('m_hz_per_w', 'float', check=_positive)
        n = ibr.get('n_v_per_var', 'float', check=_positive)
        p_star = ibr.get('p_star_w', 'float')
        q_star = ibr.get('q_star_var', 'float')
        k = ibr.get('k', 'float', check=_positive)
        kappa = ibr.get('kappa', 'float', check=_positive)
        xi = ibr.get('xi', 'float', check=_non_negative)
        delta0 = ibr.get('delta0_deg', 'float', 0.0)
        ibr.finish()
        if bus_id is not None:
            if bus_id not in buses:
                errors.append(f"ibr.{ibr_id}.bus: unknown bus {bus_id!r}")
            elif bus_id in ibr_bus.values():
                errors.append(f"ibr.{ibr_id}.bus: bus {bus_id!r} already carries an IBR")
            ibr_bus[ibr_id] = bus_id
        values = (f_star, v_star, m, n, p_star, q_star, k, kappa, xi, delta0)
        if all(isinstance(v, float) for v in values):
            params[ibr_id] = IbrParams(
                f_star * TWO_PI, v_star, m * TWO_PI, n, p_star, q_star, k, kappa, xi
            )
            initial[ibr_id] = IbrState(delta0 * DEG, 0.0, 0.0)

    line_tables = doc.get('line', {})
    lines: list[TieLine] = []
    adjacency_overrides: dict[str, list[str]] = {}
    for line_id, table in (line_tables.items() if isinstance(line_tables, dict) else ()):
        line = _Table(f'line.{line_id}', table, errors)
        from_bus = line.get('from', 'str')
        to_bus = line.get('to', 'str')
        r = line.get('r_ohm', 'float')
        x = line.get('x_ohm', 'float')
        breaker = line.get('breaker', 'str', None)
        adjacent = line.get('adjacent_ibrs', 'strings', None)
        line.finish()
        if adjacent is not None:
            if breaker is None:
                errors.append(f"line.{line_id}.adjacent_ibrs: line has no breaker")
            adjacency_overrides[line_id] = adjacent
        if None not in (from_bus, to_bus, r, x):
            lines.append(TieLine(line_id, from_bus, to_bus, r, x, breaker))

    links = []
    link_tables = doc.get('commlink', [])
    if not isinstance(link_tables, list):
        errors.append("commlink: expected an array of tables")
        link_tables = []
    for index, table in enumerate(link_tables):
        link = _Table(f'commlink[{index}]', table, errors)
        i = link.get('i', 'str')
        j = link.get('j', 'str')
        gains = [link.get(g, 'float', check=_non_negative) for g in ('a', 'b', 'd')]
        link.finish()
        if i is not None and j is not None:
            if i == j:
                errors.append(f"commlink[{index}]: link from {i!r} to itself")
            for end in (i, j):
                if end not in ibr_tables:
                    errors.append(f"commlink[{index}]: unknown IBR {end!r}")
            links.append((i, j, *gains))

    if errors:
        raise ScenarioError(errors)

    if v_nominal is None:
        v_stars = {p.v_star for p in params.values()}
        if len(v_stars) != 1:
            raise ScenarioError("sim.v_nominal_v: required when IBRs have different v_star_v")
        v_nominal = v_stars.pop()

    bus_objs = tuple(
        MgBus(bus_id, next((i for i, b in ibr_bus.items() if b == bus_id), None), load)
        for bus_id, load in sorted(buses.items())
    )
    lines.sort(key=lambda line: line.id)
    breakers = tuple(sorted(
        (
            BreakerSpec(
                line.breaker,
                line.id,
                frozenset(adjacency_overrides[line.id])
                if line.id in adjacency_overrides
                else default_adjacent_ibrs(bus_objs, lines, line.id),
            )
            for line in lines if line.breaker is not None
        ),
        key=lambda breaker: breaker.id,
    ))
    graph = CommGraph.from_links(ibr_tables, links, period, delay, phase_every_step)
    topology = NmgTopology(bus_objs, tuple(lines), breakers, graph, v_nominal)

    errors.extend(validate_topology(topology))
    for ibr_id, p in sorted(params.items()):
        errors.extend(validate_params(ibr_id, p))
        if p.q_star == 0 and any(graph.gains(ibr_id, j)[1] for j in graph.nodes):
            errors.append(f"ibr.{ibr_id}.q_star_var: must be nonzero with voltage consensus gains")
    for breaker in initially_closed:
        if breaker not in topology.breaker_ids:
            errors.append(f"sim.initially_closed: unknown breaker {breaker!r}")

    try:
        sim_config = SimConfig(
            dt,
            duration,
            integrator,
            SoftStartProfile(ramp, v_nominal) if ramp > 0 else None,
            record_every,
            after_closure,
            no_dapi_voltage,
            no_phase,
            frozenset(initially_closed),
        )
    except ValueError as exc:
        errors.append(f"sim: {exc}")
    try:
        sync_config = SyncCheckConfig(freq_tol, volt_tol, phase_tol, dwell)
    except ValueError as exc:
        errors.append(f"sync: {exc}")

    if errors:
        raise ScenarioError(errors)

    return Scenario(topology, params, initial, sim_config, sync_config)


def load_scenario(path: PathLike[str] | str) -> Scenario:
    path = _Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ScenarioError(f"cannot read {str(path)!r}: {exc.strerror}") from None
    scenario = parse_scenario(text)
    _logger.info(
        "loaded scenario %s: %d IBRs, %d breakers",
        path, len(scenario.topology.ibr_ids), len(scenario.topology.breaker_ids),
    )
    return scenario


def default_scenario_path() -> _Path:
    return _Path(str(_files('nmgsim') / 'scenarios' / 'default_7mg.toml'))


def _unscale(value: float, scale: float) -> float:
    """A float `x` with `x * scale == value` exactly, when one exists nearby."""

    guess = value / scale
    candidates = [guess]
    up = down = guess
    for _ in range(4):
        up = _math.nextafter(up, _math.inf)
        down = _math.nextafter(down, -_math.inf)
        candidates += [up, down]
    return next((x for x in candidates if x * scale == value), guess)


def _key(name: str) -> str:
    return name if _BARE_KEY.fullmatch(name) else _json.dumps(name)


def _value(value: object) -> str:
    match value:
        case bool():
            return 'true' if value else 'false'
        case int():
            return str(value)
        case float():
            return repr(value)
        case str():
            return _json.dumps(value)
        case list() | tuple():
            return '[' + ', '.join(_value(v) for v in value) + ']'
        case _:
            raise TypeError(f"cannot serialize {value!r}")


def _table(header: str, entries: list[tuple[str, object]]) -> list[str]:
    return [header, *(f'{key} = {_value(value)}' for key, value in entries if value is not None), '']


def format_scenario(scenario: Scenario) -> str:

    topology = scenario.topology
    sim = scenario.sim
    comm = topology.comm
    sync = scenario.sync

    out = _table('[sim]', [
        ('dt_control_s', sim.dt_control),
        ('duration_s', sim.duration),
        ('integrator', sim.integrator),
        ('soft_start_ramp_s', 0.0 if sim.soft_start is None else sim.soft_start.ramp_duration),
        ('record_every', sim.record_every),
        ('v_nominal_v', topology.v_nominal),
        ('initially_closed', sorted(sim.initially_closed)),
        ('phase_consensus_after_closure', sim.phase_consensus_after_closure),
        ('disable_dapi_voltage', sim.disable_dapi_voltage),
        ('disable_phase_consensus', sim.disable_phase_consensus),
    ])
    out += _table('[comm]', [
        ('period_s', comm.period),
        ('delay_s', comm.delay),
        ('phase_every_step', comm.phase_every_step),
    ])
    out += _table('[sync]', [
        ('freq_tol_hz', sync.freq_tol),
        ('volt_tol_frac', sync.volt_tol),
        ('phase_tol_deg', sync.phase_tol),
        ('dwell_s', sync.dwell),
    ])

    for ibr in topology.ibr_ids:
        p = scenario.params[ibr]
        out += _table(f'[ibr.{_key(ibr)}]', [
            ('bus', topology.bus_of(ibr)),
            ('omega_star_hz', _unscale(p.omega_star, TWO_PI)),
            ('v_star_v', p.v_star),
            ('m_hz_per_w', _unscale(p.m, TWO_PI)),
            ('n_v_per_var', p.n),
            ('p_star_w', p.p_star),
            ('q_star_var', p.q_star),
            ('k', p.k),
            ('kappa', p.kappa),
            ('xi', p.xi),
            ('delta0_deg', _unscale(scenario.initial_states[ibr].delta, DEG)),
        ])

    for bus in sorted(topology.buses, key=lambda bus: bus.id):
        load = bus.load
        out += _table(f'[bus.{_key(bus.id)}]', [] if load is None else [
            ('load_p_w', load.p_nominal),
            ('load_q_var', load.q_nominal),
            ('load_model', load.model.value),
        ])

    for line in sorted(topology.lines, key=lambda line: line.id):
        adjacent = None
        if line.breaker is not None:
            spec = topology.breaker(line.breaker).adjacent_ibrs
            if spec != default_adjacent_ibrs(topology.buses, topology.lines, line.id):
                adjacent = sorted(spec)
        out += _table(f'[line.{_key(line.id)}]', [
            ('from', line.from_bus),
            ('to', line.to_bus),
            ('r_ohm', line.resistance),
            ('x_ohm', line.reactance),
            ('breaker', line.breaker),
            ('adjacent_ibrs', adjacent),
        ])

    for (i, j), (a, b, d) in sorted(comm.adjacency.items()):
        if i < j:
            out += _table('[[commlink]]', [('i', i), ('j', j), ('a', a), ('b', b), ('d', d)])

    return '\n'.join(out)
