"""Simulation and analysis of one-bit quantized formation control on a line."""

from .analysis import classify_basin_3agent, convergence_report, lyapunov
from .errors import ConfigError, QuantformError
from .hull import classify_equilibrium, contains_zero, hull_at
from .model import FormationSpec, XState, ZState
from .solver import BranchPolicy, simulate

__all__ = [
    "BranchPolicy",
    "ConfigError",
    "FormationSpec",
    "QuantformError",
    "XState",
    "ZState",
    "classify_basin_3agent",
    "classify_equilibrium",
    "contains_zero",
    "convergence_report",
    "hull_at",
    "lyapunov",
    "simulate",
]
