#!/usr/bin/env python3

"""
Static structure of a network of microgrids.

A topology is a set of buses (each optionally carrying one grid-forming IBR
and one aggregate load), the tie-lines between them (optionally switched by a
breaker) and the communication graph over the IBRs. Everything here is
immutable once built; the only thing that changes during a run is which
breakers are closed, and that is passed in explicitly.
"""

from __future__ import annotations as _annotations

import math as _math

from dataclasses import dataclass as _dataclass, field as _field
from enum import StrEnum as _StrEnum
from typing import NamedTuple as _NamedTuple

import networkx as _nx
import numpy as _np

from .errors import TopologyError

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    BreakerStates = Mapping[str, bool]


class LoadModel(_StrEnum):
    CONSTANT_IMPEDANCE = 'constant-impedance'
    CONSTANT_POWER = 'constant-power'


@_dataclass(frozen=True, slots=True)
class LoadSpec:
    p_nominal: float
    q_nominal: float = 0.0
    model: LoadModel = LoadModel.CONSTANT_IMPEDANCE


@_dataclass(frozen=True, slots=True)
class MgBus:
    id: str
    ibr: str | None = None
    load: LoadSpec | None = None


@_dataclass(frozen=True, slots=True)
class TieLine:
    id: str
    from_bus: str
    to_bus: str
    resistance: float
    reactance: float
    breaker: str | None = None

    @property
    def admittance(self) -> complex:
        return 1.0 / complex(self.resistance, self.reactance)


@_dataclass(frozen=True, slots=True)
class BreakerSpec:
    id: str
    line: str
    adjacent_ibrs: frozenset[str]


class Neighbor(_NamedTuple):
    id: str
    a: float
    b: float
    d: float


@_dataclass(frozen=True)
class CommGraph:
    """
    Communication graph over the IBRs.

    `adjacency` maps ordered IBR pairs to their `(a, b, d)` gains; pairs not
    present have all gains zero. Use `from_links()` to build a symmetric graph
    from undirected link entries.
    """

    nodes: tuple[str, ...]
    adjacency: Mapping[tuple[str, str], tuple[float, float, float]]
    period: float
    delay: float = 0.0
    phase_every_step: bool = False

    @classmethod
    def from_links(
        cls,
        nodes: Iterable[str],
        links: Iterable[tuple[str, str, float, float, float]],
        period: float,
        delay: float = 0.0,
        phase_every_step: bool = False,
    ) -> CommGraph:
        adjacency: dict[tuple[str, str], tuple[float, float, float]] = {}
        for i, j, a, b, d in links:
            adjacency[i, j] = adjacency[j, i] = (float(a), float(b), float(d))
        return cls(
            tuple(sorted(nodes)), adjacency, float(period), float(delay), bool(phase_every_step)
        )

    def gains(self, i: str, j: str) -> tuple[float, float, float]:
        return self.adjacency.get((i, j), (0.0, 0.0, 0.0))

    def links(self) -> list[tuple[str, str, float, float, float]]:
        """Undirected links with at least one nonzero gain, each listed once."""
        return [
            (i, j, *gains)
            for (i, j), gains in sorted(self.adjacency.items())
            if i < j and any(gains)
        ]

    def gain_matrices(
        self, order: Iterable[str] | None = None
    ) -> tuple[_np.ndarray, _np.ndarray, _np.ndarray]:
        order = tuple(self.nodes if order is None else order)
        index = {ibr: k for k, ibr in enumerate(order)}
        mats = _np.zeros((3, len(order), len(order)))
        for (i, j), gains in self.adjacency.items():
            if i in index and j in index and i != j:
                mats[:, index[i], index[j]] = gains
        return mats[0], mats[1], mats[2]

    def is_connected(self, ibrs: Iterable[str] | None = None) -> bool:
        ibrs = set(self.nodes if ibrs is None else ibrs)
        if len(ibrs) <= 1:
            return True
        graph = _nx.Graph()
        graph.add_nodes_from(ibrs)
        graph.add_edges_from(
            (i, j) for (i, j), gains in self.adjacency.items()
            if i in ibrs and j in ibrs and any(gains)
        )
        return _nx.is_connected(graph)


@_dataclass(frozen=True)
class NmgTopology:

    buses: tuple[MgBus, ...]
    lines: tuple[TieLine, ...]
    breakers: tuple[BreakerSpec, ...]
    comm: CommGraph
    v_nominal: float
    _bus_by_ibr: dict[str, str] = _field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, '_bus_by_ibr', {bus.ibr: bus.id for bus in self.buses if bus.ibr is not None}
        )

    @property
    def bus_ids(self) -> tuple[str, ...]:
        return tuple(sorted(bus.id for bus in self.buses))

    @property
    def ibr_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._bus_by_ibr))

    @property
    def breaker_ids(self) -> tuple[str, ...]:
        return tuple(sorted(breaker.id for breaker in self.breakers))

    def bus(self, bus_id: str) -> MgBus:
        for bus in self.buses:
            if bus.id == bus_id:
                return bus
        raise TopologyError(f"unknown bus {bus_id!r}")

    def bus_of(self, ibr: str) -> str:
        try:
            return self._bus_by_ibr[ibr]
        except KeyError:
            raise TopologyError(f"unknown IBR {ibr!r}") from None

    def line(self, line_id: str) -> TieLine:
        for line in self.lines:
            if line.id == line_id:
                return line
        raise TopologyError(f"unknown line {line_id!r}")

    def breaker(self, breaker_id: str) -> BreakerSpec:
        for breaker in self.breakers:
            if breaker.id == breaker_id:
                return breaker
        raise TopologyError(f"unknown breaker {breaker_id!r}")

    def loads(self) -> dict[str, LoadSpec]:
        return {bus.id: bus.load for bus in self.buses if bus.load is not None}


def validate_topology(topology: NmgTopology) -> list[str]:
    """Return every problem found in `topology`; an empty list means well-formed."""

    violations: list[str] = []

    def duplicates(kind: str, ids: list[str]) -> None:
        seen: set[str] = set()
        for id in ids:
            if id in seen:
                violations.append(f"duplicate {kind} id {id!r}")
            seen.add(id)

    duplicates('bus', [bus.id for bus in topology.buses])
    duplicates('IBR', [bus.ibr for bus in topology.buses if bus.ibr is not None])
    duplicates('line', [line.id for line in topology.lines])
    duplicates('breaker', [breaker.id for breaker in topology.breakers])

    if not _math.isfinite(topology.v_nominal) or topology.v_nominal <= 0:
        violations.append(f"nominal voltage must be positive, got {topology.v_nominal!r}")

    bus_ids = {bus.id for bus in topology.buses}
    ibr_ids = set(topology.ibr_ids)
    line_ids = {line.id for line in topology.lines}
    breaker_ids = {breaker.id for breaker in topology.breakers}

    for bus in topology.buses:
        if bus.load is not None and bus.load.p_nominal < 0:
            violations.append(f"bus {bus.id!r}: negative load p_nominal {bus.load.p_nominal!r}")

    for line in topology.lines:
        for end in (line.from_bus, line.to_bus):
            if end not in bus_ids:
                violations.append(f"dangling reference: line {line.id!r} names unknown bus {end!r}")
        if line.from_bus == line.to_bus:
            violations.append(f"line {line.id!r} connects bus {line.from_bus!r} to itself")
        if line.resistance < 0:
            violations.append(f"line {line.id!r}: negative resistance {line.resistance!r}")
        if line.resistance == 0 and line.reactance == 0:
            violations.append(f"line {line.id!r}: zero impedance")
        if line.breaker is not None and line.breaker not in breaker_ids:
            violations.append(
                f"dangling reference: line {line.id!r} names unknown breaker {line.breaker!r}"
            )

    for breaker in topology.breakers:
        if breaker.line not in line_ids:
            violations.append(
                f"dangling reference: breaker {breaker.id!r} names unknown line {breaker.line!r}"
            )
        elif topology.line(breaker.line).breaker != breaker.id:
            violations.append(f"breaker {breaker.id!r} and line {breaker.line!r} disagree")
        if not breaker.adjacent_ibrs:
            violations.append(f"breaker {breaker.id!r} has no adjacent IBRs")
        for ibr in sorted(breaker.adjacent_ibrs - ibr_ids):
            violations.append(
                f"dangling reference: breaker {breaker.id!r} names unknown IBR {ibr!r}"
            )

    comm = topology.comm
    if not comm.period > 0:
        violations.append(f"communication period must be positive, got {comm.period!r}")
    if comm.delay < 0:
        violations.append(f"communication delay must not be negative, got {comm.delay!r}")
    for ibr in sorted(set(comm.nodes) - ibr_ids):
        violations.append(f"dangling reference: comm graph names unknown IBR {ibr!r}")
    for ibr in sorted(ibr_ids - set(comm.nodes)):
        violations.append(f"IBR {ibr!r} missing from comm graph")
    for (i, j), gains in sorted(comm.adjacency.items()):
        if i not in ibr_ids or j not in ibr_ids:
            violations.append(f"dangling reference: comm link {i!r}-{j!r} names unknown IBR")
            continue
        if any(g < 0 or not _math.isfinite(g) for g in gains):
            violations.append(f"comm link {i!r}-{j!r}: gains must be finite and >= 0")
        if comm.gains(j, i) != gains:
            violations.append(f"comm link {i!r}-{j!r}: gains are not symmetric")
    if any(any(gains) for gains in comm.adjacency.values()) and not comm.is_connected(ibr_ids):
        violations.append("disconnected comm graph")

    if not any(v.startswith('dangling reference') for v in violations):
        for island in electrical_islands(topology, {}):
            has_load = any(topology.bus(bus).load is not None for bus in island)
            has_ibr = any(topology.bus(bus).ibr is not None for bus in island)
            if has_load and not has_ibr:
                violations.append(
                    f"island {{{', '.join(sorted(island))}}} carries load but no IBR"
                )

    return violations


def _conducting_graph(topology: NmgTopology, breaker_states: BreakerStates) -> _nx.Graph:
    graph = _nx.Graph()
    graph.add_nodes_from(topology.bus_ids)
    for line in topology.lines:
        if line.breaker is None or breaker_states.get(line.breaker, False):
            graph.add_edge(line.from_bus, line.to_bus)
    return graph


def electrical_islands(
    topology: NmgTopology, breaker_states: BreakerStates
) -> list[frozenset[str]]:
    """
    Partition the buses into electrically connected islands.

    A line conducts iff it has no breaker or its breaker is closed
    (`breaker_states[id] is True`); breakers missing from the mapping are open.
    Islands are returned ordered by their smallest bus id.
    """
    components = _nx.connected_components(_conducting_graph(topology, breaker_states))
    return sorted((frozenset(c) for c in components), key=min)


def ibr_island_map(topology: NmgTopology, breaker_states: BreakerStates) -> dict[str, int]:
    island_of_bus = {
        bus: k for k, island in enumerate(electrical_islands(topology, breaker_states))
        for bus in island
    }
    return {ibr: island_of_bus[topology.bus_of(ibr)] for ibr in topology.ibr_ids}


def default_adjacent_ibrs(
    buses: Iterable[MgBus], lines: Iterable[TieLine], line_id: str
) -> frozenset[str]:
    """IBRs of the microgrids on either side of `line_id`'s breaker."""

    buses = tuple(buses)
    lines = tuple(lines)
    graph = _nx.Graph()
    graph.add_nodes_from(bus.id for bus in buses)
    graph.add_edges_from((line.from_bus, line.to_bus) for line in lines if line.breaker is None)
    ibr_at = {bus.id: bus.ibr for bus in buses if bus.ibr is not None}

    line = next((line for line in lines if line.id == line_id), None)
    if line is None:
        raise TopologyError(f"unknown line {line_id!r}")

    adjacent: set[str] = set()
    for end in (line.from_bus, line.to_bus):
        if end in graph:
            adjacent.update(ibr_at[bus] for bus in _nx.node_connected_component(graph, end)
                            if bus in ibr_at)
    return frozenset(adjacent)


def comm_neighbors(graph: CommGraph, ibr: str) -> frozenset[Neighbor]:
    if ibr not in graph.nodes:
        raise TopologyError(f"unknown IBR {ibr!r}")
    return frozenset(
        Neighbor(j, *gains)
        for (i, j), gains in graph.adjacency.items()
        if i == ibr and j != ibr and any(gains)
    )
