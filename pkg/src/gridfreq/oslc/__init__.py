"""
Optimal supply and load control: costs, dispatch and controller maps.
"""

from .costs import CostFunction, QuadraticCost, UserCost, marginal_cost
from .solver import KktReport, OslcProblem, OslcSolution, allocation_candidate, solve_oslc, verify_kkt
from .maps import PRICE_FUNCTION, ControllerMap, oslc_blocks, synthesize_controller_maps

__all__ = [
    "CostFunction",
    "QuadraticCost",
    "UserCost",
    "marginal_cost",
    "OslcProblem",
    "OslcSolution",
    "KktReport",
    "allocation_candidate",
    "solve_oslc",
    "verify_kkt",
    "PRICE_FUNCTION",
    "ControllerMap",
    "synthesize_controller_maps",
    "oslc_blocks",
]
