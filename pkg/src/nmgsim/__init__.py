#!/usr/bin/env python3

"""Black-start and restoration simulator for islanded networks of microgrids."""

from __future__ import annotations as _annotations

from .controller import IbrParams, IbrState, SoftStartProfile
from .engine import RunResult, SimConfig, Simulation, run_scenario
from .errors import (
    ControllerError,
    NmgError,
    ScenarioError,
    SolverError,
    TopologyError,
    TraceFormatError,
)
from .scenario import Scenario, default_scenario_path, format_scenario, load_scenario, parse_scenario
from .sync import SyncCheckConfig
from .topology import NmgTopology, validate_topology

__version__ = '0.1.0'

__all__ = [
    'ControllerError',
    'IbrParams',
    'IbrState',
    'NmgError',
    'NmgTopology',
    'RunResult',
    'Scenario',
    'ScenarioError',
    'SimConfig',
    'Simulation',
    'SoftStartProfile',
    'SolverError',
    'SyncCheckConfig',
    'TopologyError',
    'TraceFormatError',
    'default_scenario_path',
    'format_scenario',
    'load_scenario',
    'parse_scenario',
    'run_scenario',
    'validate_topology',
]
