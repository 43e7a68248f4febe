"""Programmable wireless environments: tile graphs, configuration search, update scheduling, PDP simulation."""

from .channel import ChannelParams, PowerDelayProfile, compute_pdp, doppler_spread, pdp_csv, rms_delay_spread
from .graph import Configuration, PweGraph, build_graph
from .scenario import ScenarioFile, build_scenario_graph, builtin_scenario, parse_scenario
from .sim import SimSetup, TimeSeries, Trajectory, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "PowerDelayProfile", "compute_pdp", "doppler_spread", "pdp_csv", "rms_delay_spread",
    "Configuration", "PweGraph", "build_graph",
    "ScenarioFile", "build_scenario_graph", "builtin_scenario", "parse_scenario",
    "SimSetup", "TimeSeries", "Trajectory", "run_scenario",
]
