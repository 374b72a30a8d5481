"""
Closed-loop simulation, equilibria and Lyapunov evaluation.
"""

from .state import (
    ControllerConfig,
    ControllerMode,
    Disturbance,
    IntegrationMethod,
    LyapunovBreakdown,
    Scenario,
    SimConfig,
    SimulationState,
    StateLayout,
    Trajectory,
)
from .engine import SimulationEngine, assemble_rhs, integrate, rk4_step, solve_load_frequency
from .equilibrium import EquilibriumReport, angles_from_eta, dispatch_problem, find_equilibrium
from .lyapunov import (
    MonotonicityReport,
    bus_storages,
    check_monotone,
    lyapunov_breakdown,
    lyapunov_series,
    potential_energy,
)

__all__ = [
    "ControllerConfig",
    "ControllerMode",
    "Disturbance",
    "IntegrationMethod",
    "LyapunovBreakdown",
    "Scenario",
    "SimConfig",
    "SimulationState",
    "StateLayout",
    "Trajectory",
    "SimulationEngine",
    "assemble_rhs",
    "integrate",
    "rk4_step",
    "solve_load_frequency",
    "EquilibriumReport",
    "angles_from_eta",
    "dispatch_problem",
    "find_equilibrium",
    "MonotonicityReport",
    "bus_storages",
    "check_monotone",
    "lyapunov_breakdown",
    "lyapunov_series",
    "potential_energy",
]
