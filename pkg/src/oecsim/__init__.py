"""Trace-driven simulation of a time-shifting serverless executor on a small
Earth-observation satellite, plus the offline admission planner."""

from .executor import GatePolicy, SimConfig, SimReport, Simulation, gate_check
from .framesource import CloudModel, FrameGenerator, FrameMeta, prefilter
from .planner import FeasibilityReport, PlatformParams, check_feasibility
from .workload import DEFAULT_SET, MEASURED_PROFILES, OVERLOAD_SET, FunctionProfile

__version__ = "0.1.0"

__all__ = [
    "CloudModel", "DEFAULT_SET", "FeasibilityReport", "FrameGenerator", "FrameMeta",
    "FunctionProfile", "GatePolicy", "OVERLOAD_SET", "PlatformParams", "SimConfig",
    "SimReport", "Simulation", "MEASURED_PROFILES", "check_feasibility", "gate_check", "prefilter",
]
