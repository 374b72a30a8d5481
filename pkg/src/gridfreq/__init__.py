"""
gridfreq

Distributed secondary frequency control of power networks: network and device
models, optimal supply and load control, dissipativity certificates and a
closed-loop simulator.
"""

__version__ = "0.1.0"

from gridfreq.exceptions import (
    ConfigurationError,
    DimensionError,
    GridFreqError,
    InfeasibleDispatchError,
    NumericalError,
    ValidationError,
)
from gridfreq.network import Bus, BusKind, CommLink, Line, NetworkModel, line_flow, validate
from gridfreq.oslc import OslcProblem, OslcSolution, QuadraticCost, solve_oslc, verify_kkt
from gridfreq.consensus import equilibrium_balance_check, observer_rhs, pc_rhs
from gridfreq.certification import (
    Certificate,
    SupplyRateSpec,
    check_bus,
    check_bus_passivity,
    check_lti_dissipativity,
)
from gridfreq.simulation import (
    Scenario,
    Trajectory,
    assemble_rhs,
    find_equilibrium,
    integrate,
    lyapunov_breakdown,
    solve_load_frequency,
)
from gridfreq.scenarios import (
    dump_scenario,
    emit_results,
    generate_synthetic_network,
    load_scenario,
    oslc_problem_from_scenario,
)

__all__ = [
    "GridFreqError",
    "ConfigurationError",
    "ValidationError",
    "DimensionError",
    "NumericalError",
    "InfeasibleDispatchError",
    "Bus",
    "BusKind",
    "Line",
    "CommLink",
    "NetworkModel",
    "line_flow",
    "validate",
    "OslcProblem",
    "OslcSolution",
    "QuadraticCost",
    "solve_oslc",
    "verify_kkt",
    "pc_rhs",
    "observer_rhs",
    "equilibrium_balance_check",
    "Certificate",
    "SupplyRateSpec",
    "check_lti_dissipativity",
    "check_bus",
    "check_bus_passivity",
    "Scenario",
    "Trajectory",
    "assemble_rhs",
    "solve_load_frequency",
    "integrate",
    "find_equilibrium",
    "lyapunov_breakdown",
    "load_scenario",
    "dump_scenario",
    "generate_synthetic_network",
    "emit_results",
    "oslc_problem_from_scenario",
]
