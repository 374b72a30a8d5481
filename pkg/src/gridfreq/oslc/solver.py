"""
Optimal supply and load control (OSLC) dispatch.

minimize   sum_j C_j(p^M_j) + sum_j C_dj(d^c_j)
subject to sum_j p^M_j = sum_j (d^c_j + p^L_j)
           p^M_j in [p^M,min_j, p^M,max_j],  d^c_j in [d^c,min_j, d^c,max_j]

solved by bisection on the common price nu.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import bisect

from ..exceptions import InfeasibleDispatchError
from .costs import CostFunction

logger = logging.getLogger(__name__)

PRICE_CAP = 1e9


class OslcProblem(BaseModel):
    """
    Per-bus costs (None where a bus has no participant) and disturbances.

    Bounds are carried by the cost functions.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    disturbance: Tuple[float, ...]
    supply_costs: Tuple[Optional[CostFunction], ...] = ()
    demand_costs: Tuple[Optional[CostFunction], ...] = ()
    bus_ids: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _fill_and_check(self) -> "OslcProblem":
        n = len(self.disturbance)
        for name in ("supply_costs", "demand_costs"):
            values = getattr(self, name)
            if not values:
                object.__setattr__(self, name, (None,) * n)
            elif len(values) != n:
                raise ValueError(f"{name} has {len(values)} entries for {n} buses")
        if not self.bus_ids:
            object.__setattr__(self, "bus_ids", tuple(str(i) for i in range(n)))
        elif len(self.bus_ids) != n:
            raise ValueError(f"bus_ids has {len(self.bus_ids)} entries for {n} buses")
        return self

    @property
    def n_buses(self) -> int:
        return len(self.disturbance)

    @property
    def total_disturbance(self) -> float:
        return float(np.sum(self.disturbance))

    def supply_at(self, nu: float) -> np.ndarray:
        return np.array([0.0 if c is None else float(c.response(nu)) for c in self.supply_costs])

    def demand_at(self, nu: float) -> np.ndarray:
        return np.array([0.0 if c is None else float(c.response(-nu)) for c in self.demand_costs])

    def surplus(self, nu: float) -> float:
        """Net supply minus total disturbance at price ``nu``; nondecreasing in nu."""
        return float(np.sum(self.supply_at(nu)) - np.sum(self.demand_at(nu)) - self.total_disturbance)

    def feasible_range(self) -> Tuple[float, float]:
        """Smallest and largest achievable net supply."""
        lower = upper = 0.0
        for c in self.supply_costs:
            if c is not None:
                lower += c.lower
                upper += c.upper
        for c in self.demand_costs:
            if c is not None:
                lower -= c.upper
                upper -= c.lower
        return lower, upper

    def scaled(self, factor: float) -> "OslcProblem":
        return OslcProblem(
            disturbance=self.disturbance,
            supply_costs=tuple(None if c is None else c.scaled(factor) for c in self.supply_costs),
            demand_costs=tuple(None if c is None else c.scaled(factor) for c in self.demand_costs),
            bus_ids=self.bus_ids,
        )


class OslcSolution(BaseModel):
    """Optimal allocation, price and KKT multipliers (zero where a bus has no participant)."""

    supply: List[float]
    demand: List[float]
    price: float
    lambda_upper: List[float]
    lambda_lower: List[float]
    mu_upper: List[float]
    mu_lower: List[float]

    def total_cost(self, problem: OslcProblem) -> float:
        total = 0.0
        for c, p in zip(problem.supply_costs, self.supply):
            if c is not None:
                total += float(c.value(p))
        for c, d in zip(problem.demand_costs, self.demand):
            if c is not None:
                total += float(c.value(d))
        return total


class KktReport(BaseModel):
    """Per-condition residuals; ``violations`` names the conditions above tolerance."""

    residuals: Dict[str, float]
    violations: List[str] = []
    tolerance: float

    @property
    def ok(self) -> bool:
        return not self.violations


def _upper_gap(cost: Optional[CostFunction], price: float) -> float:
    if cost is None or not np.isfinite(cost.upper):
        return 0.0
    return max(0.0, price - float(cost.derivative(cost.upper)))


def _lower_gap(cost: Optional[CostFunction], price: float) -> float:
    if cost is None or not np.isfinite(cost.lower):
        return 0.0
    return max(0.0, float(cost.derivative(cost.lower)) - price)


def _bracket(problem: OslcProblem) -> Tuple[float, float]:
    lo, hi = -1.0, 1.0
    while problem.surplus(lo) > 0:
        lo *= 2.0
        if lo < -PRICE_CAP:
            raise InfeasibleDispatchError(problem.total_disturbance, *problem.feasible_range())
    while problem.surplus(hi) < 0:
        hi *= 2.0
        if hi > PRICE_CAP:
            raise InfeasibleDispatchError(problem.total_disturbance, *problem.feasible_range())
    return lo, hi


def solve_oslc(problem: OslcProblem, tol: float = 1e-12) -> OslcSolution:
    """
    Solve the dispatch problem.

    The surplus sum_j p_j(nu) - sum_j d_j(nu) - sum p^L is nondecreasing in nu,
    so the optimal price is found by bisection once it is bracketed.

    Args:
        problem: Costs, bounds and disturbances
        tol: Absolute tolerance on the price

    Returns:
        OslcSolution with multipliers reconstructed from the price

    Raises:
        InfeasibleDispatchError: When the total disturbance cannot be balanced
    """
    lower, upper = problem.feasible_range()
    total = problem.total_disturbance
    if total < lower - tol or total > upper + tol:
        raise InfeasibleDispatchError(total, lower, upper)

    lo, hi = _bracket(problem)
    if problem.surplus(lo) == 0.0:
        nu = lo
    elif problem.surplus(hi) == 0.0:
        nu = hi
    else:
        nu = bisect(problem.surplus, lo, hi, xtol=tol, maxiter=500)
    logger.debug("OSLC price bracket [%g, %g] -> nu = %.12g", lo, hi, nu)

    return allocation_candidate(problem, problem.supply_at(nu), problem.demand_at(nu), nu)


def allocation_candidate(problem: OslcProblem, supply, demand, price: float) -> OslcSolution:
    """
    Wrap an allocation and a price as a KKT candidate.

    Multipliers are the gaps between the price and the marginal cost at each
    active bound, which is the only choice that can satisfy stationarity.
    """
    nu = float(price)
    return OslcSolution(
        supply=[float(p) for p in supply],
        demand=[float(d) for d in demand],
        price=nu,
        lambda_upper=[_upper_gap(c, nu) for c in problem.supply_costs],
        lambda_lower=[_lower_gap(c, nu) for c in problem.supply_costs],
        mu_upper=[_upper_gap(c, -nu) for c in problem.demand_costs],
        mu_lower=[_lower_gap(c, -nu) for c in problem.demand_costs],
    )


def _slack(multiplier: float, distance: float) -> float:
    if not np.isfinite(distance):
        return abs(multiplier)
    return abs(multiplier * distance)


def verify_kkt(problem: OslcProblem, candidate: OslcSolution, tol: float = 1e-6) -> KktReport:
    """
    Check a candidate against the KKT conditions of the dispatch problem.

    Stationarity:      C'_j(p) = nu - lambda+ + lambda-,  C'_dj(d) = -nu - mu+ + mu-
    Primal:            balance and box bounds
    Dual:              all multipliers >= 0
    Complementarity:   multiplier * distance to its bound = 0

    Never raises; the report lists every residual.
    """
    nu = candidate.price
    stationarity = 0.0
    bounds = 0.0
    slackness = 0.0
    multipliers: List[float] = []

    for j, cost in enumerate(problem.supply_costs):
        p, up, down = candidate.supply[j], candidate.lambda_upper[j], candidate.lambda_lower[j]
        multipliers += [up, down]
        if cost is None:
            bounds = max(bounds, abs(p))
            continue
        stationarity = max(stationarity, abs(float(cost.derivative(p)) - (nu - up + down)))
        bounds = max(bounds, p - cost.upper, cost.lower - p, 0.0)
        slackness = max(slackness, _slack(up, cost.upper - p), _slack(down, p - cost.lower))

    for j, cost in enumerate(problem.demand_costs):
        d, up, down = candidate.demand[j], candidate.mu_upper[j], candidate.mu_lower[j]
        multipliers += [up, down]
        if cost is None:
            bounds = max(bounds, abs(d))
            continue
        stationarity = max(stationarity, abs(float(cost.derivative(d)) - (-nu - up + down)))
        bounds = max(bounds, d - cost.upper, cost.lower - d, 0.0)
        slackness = max(slackness, _slack(up, cost.upper - d), _slack(down, d - cost.lower))

    residuals = {
        "stationarity": float(stationarity),
        "balance": abs(float(np.sum(candidate.supply) - np.sum(candidate.demand)) - problem.total_disturbance),
        "bounds": float(bounds),
        "dual_feasibility": float(max([0.0] + [-m for m in multipliers])),
        "complementarity": float(slackness),
    }
    violations = [name for name, value in residuals.items() if not value <= tol]
    if violations:
        logger.info("KKT check failed: %s", ", ".join(f"{n}={residuals[n]:.3e}" for n in violations))
    return KktReport(residuals=residuals, violations=violations, tolerance=tol)
