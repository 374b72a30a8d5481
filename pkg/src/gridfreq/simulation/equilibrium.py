"""
Steady states of the closed loop and their optimality checks.
"""

import logging
from typing import List, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import least_squares

from ..consensus import BalanceReport, equilibrium_balance_check
from ..devices.base import Role
from ..exceptions import ConfigurationError, NumericalError
from ..network import NetworkModel
from ..oslc import KktReport, OslcProblem, OslcSolution, allocation_candidate, solve_oslc, verify_kkt
from .engine import SimulationEngine
from .state import Scenario, SimulationState

logger = logging.getLogger(__name__)

SECURITY_LIMIT = np.pi / 2


class EquilibriumReport(BaseModel):
    """How an equilibrium was found and whether it is optimal and secure."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    path: str
    residual: float
    max_abs_eta: float
    security_ok: bool
    frequency: float
    kkt: Optional[KktReport] = None
    balance: BalanceReport
    dispatch: Optional[OslcSolution] = None
    dispatch_gap: Optional[float] = None
    notes: List[str] = []

    @property
    def ok(self) -> bool:
        kkt_ok = self.kkt is None or self.kkt.ok
        return self.security_ok and self.balance.ok and kkt_ok


def _single(bus, role: Role):
    blocks = bus.blocks(role)
    if len(blocks) > 1:
        raise ConfigurationError(f"bus '{bus.id}' has {len(blocks)} {role.value} blocks; dispatch needs at most one")
    if not blocks:
        return None
    cost = blocks[0].implied_cost()
    if cost is None:
        raise ConfigurationError(f"{blocks[0]!r} at bus '{bus.id}' has no steady-state cost")
    return cost


def dispatch_problem(network: NetworkModel, p_L: np.ndarray) -> OslcProblem:
    """
    Dispatch problem whose optimum the controlled network settles to.

    Raises:
        ConfigurationError: When a bus has several supply (or demand) blocks or
            a block without an implied cost
    """
    return OslcProblem(
        disturbance=tuple(float(v) for v in p_L),
        supply_costs=tuple(_single(bus, Role.SUPPLY) for bus in network.buses),
        demand_costs=tuple(_single(bus, Role.DEMAND) for bus in network.buses),
        bus_ids=tuple(network.bus_ids),
    )


def angles_from_eta(network: NetworkModel, eta: np.ndarray) -> np.ndarray:
    """
    Bus angles (reference bus 0 at zero) reproducing ``eta`` on a spanning tree.

    Line differences off the tree are only reproduced when ``eta`` is cycle
    consistent.
    """
    index = network.bus_index()
    theta = np.zeros(len(network.buses))
    if not network.lines:
        return theta
    line_of = {}
    for k, line in enumerate(network.lines):
        line_of[(line.tail, line.head)] = (k, 1.0)
        line_of[(line.head, line.tail)] = (k, -1.0)
    root = network.bus_ids[0]
    for parent, child in nx.bfs_edges(network.physical_graph(), root):
        k, sign = line_of[(parent, child)]
        # eta_k = theta_tail - theta_head
        theta[index[child]] = theta[index[parent]] - sign * eta[k]
    return theta


class _Unknowns:
    """Maps the reduced unknown vector [theta_1.., rest of state] onto the flat state."""

    def __init__(self, engine: SimulationEngine):
        self.engine = engine
        self.n_theta = len(engine.network.buses) - 1
        self.eta = engine.layout.eta

    def to_state(self, z: np.ndarray) -> np.ndarray:
        theta = np.concatenate([[0.0], z[:self.n_theta]])
        eta = -(self.engine.E.T @ theta)
        return np.concatenate([eta, z[self.n_theta:]])

    def from_state(self, X: np.ndarray) -> np.ndarray:
        theta = angles_from_eta(self.engine.network, X[self.eta])
        return np.concatenate([theta[1:], X[self.eta.stop:]])


def initial_guess(engine: SimulationEngine, p_L: np.ndarray, nu: float) -> np.ndarray:
    """
    State built from the dispatch price: every p_c at nu, devices at rest,
    angles from the DC power flow and psi from the consensus balance.
    """
    L = engine.layout
    network = engine.network
    X = np.zeros(L.size)
    s = np.zeros(len(network.buses))
    for slot in L.slots:
        x_bar, y_bar = slot.block.equilibrium((0.0, nu))
        X[slot.states] = x_bar
        if slot.block.role is Role.SUPPLY:
            s[slot.bus] += y_bar
        elif slot.block.role is Role.DEMAND:
            s[slot.bus] -= y_bar
    X[L.pc] = nu

    if network.lines:
        E = engine.E
        susceptance = np.array([line.susceptance for line in network.lines])
        nominal = np.array([line.nominal_flow for line in network.lines])
        laplacian = E @ np.diag(susceptance) @ E.T
        rhs = s - p_L - E @ nominal
        theta = np.zeros(len(network.buses))
        theta[1:] = np.linalg.lstsq(laplacian[1:, 1:], rhs[1:], rcond=None)[0]
        X[L.eta] = -(E.T @ theta)

    if network.comm_links:
        X[L.psi] = np.linalg.lstsq(engine.consensus.comm_incidence, s - p_L, rcond=None)[0]
    if L.observer:
        gen = engine.gen
        X[L.b] = nu + p_L[gen]
        X[L.chi] = p_L[gen]
    return X


def _newton(engine: SimulationEngine, X0: np.ndarray, p_L: np.ndarray, tol: float) -> Tuple[np.ndarray, float]:
    unknowns = _Unknowns(engine)

    def residual(z: np.ndarray) -> np.ndarray:
        return engine.rhs(unknowns.to_state(z), p_L)

    result = least_squares(
        residual, unknowns.from_state(X0), method="trf", x_scale="jac",
        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * (len(X0) + 1),
    )
    X = unknowns.to_state(result.x)
    error = float(np.max(np.abs(engine.rhs(X, p_L)), initial=0.0))
    logger.debug("Steady-state least squares: %s, residual %.3e after %d evaluations",
                 result.message, error, result.nfev)
    return X, error


def find_equilibrium(
    scenario: Scenario,
    p_L: Optional[np.ndarray] = None,
    warm_start: Optional[np.ndarray] = None,
    tol: float = 1e-9,
    kkt_tol: float = 1e-6,
    settle_time: float = 2000.0,
) -> Tuple[SimulationState, EquilibriumReport]:
    """
    Equilibrium of the closed loop under the final (or given) load.

    A least-squares Newton solve on all derivatives with the line states
    parametrized by bus angles comes first; if it does not reach ``tol`` the
    system is integrated until it settles.

    Args:
        scenario: The scenario
        p_L: Load vector; defaults to every disturbance applied
        warm_start: Flat state to start from (for example a pre-disturbance
            equilibrium); defaults to a guess built from the dispatch price
        tol: Max |derivative| accepted as steady
        kkt_tol: Tolerance handed to verify_kkt and the balance check
        settle_time: Simulated-time budget of the settling fallback (s)

    Returns:
        (snapshot, report)

    Raises:
        NumericalError: When neither path reaches a steady state
        InfeasibleDispatchError: When the load cannot be balanced within the bounds
    """
    engine = SimulationEngine(scenario)
    p_L = scenario.final_load() if p_L is None else np.asarray(p_L, dtype=float)
    notes: List[str] = []

    problem: Optional[OslcProblem] = None
    dispatch: Optional[OslcSolution] = None
    try:
        problem = dispatch_problem(scenario.network, p_L)
    except ConfigurationError as e:
        notes.append(f"dispatch check skipped: {e}")
    if problem is not None:
        dispatch = solve_oslc(problem)
    nu = dispatch.price if dispatch is not None else 0.0

    X0 = initial_guess(engine, p_L, nu) if warm_start is None else np.asarray(warm_start, dtype=float)
    X, error = _newton(engine, X0, p_L, tol)
    path = "newton"
    if not error <= tol:
        logger.warning("Newton steady-state solve stalled at residual %.3e; settling by integration", error)
        notes.append(f"newton residual {error:.3e}")
        X, settled, elapsed = engine.settle(X0, p_L, settle_time)
        error = float(np.max(np.abs(engine.rhs(X, p_L)), initial=0.0))
        if not settled:
            raise NumericalError(
                f"No steady state within {settle_time:g} s of simulated time", residual=error
            )
        path = "settling"
        notes.append(f"settled after {elapsed:.6g} s")

    snapshot = engine.evaluate(X, p_L).state
    max_eta = float(np.max(np.abs(snapshot.eta), initial=0.0))
    balance = equilibrium_balance_check(snapshot, tol=kkt_tol, observer=scenario.observer)

    kkt = gap = None
    if problem is not None:
        candidate = allocation_candidate(problem, snapshot.p_M, snapshot.d_c, float(np.mean(snapshot.pc)))
        kkt = verify_kkt(problem, candidate, tol=kkt_tol)
        gap = float(max(
            np.max(np.abs(snapshot.p_M - np.array(dispatch.supply)), initial=0.0),
            np.max(np.abs(snapshot.d_c - np.array(dispatch.demand)), initial=0.0),
        ))

    report = EquilibriumReport(
        path=path,
        residual=error,
        max_abs_eta=max_eta,
        security_ok=max_eta < SECURITY_LIMIT,
        frequency=float(np.max(np.abs(snapshot.omega), initial=0.0)),
        kkt=kkt,
        balance=balance,
        dispatch=dispatch,
        dispatch_gap=gap,
        notes=notes,
    )
    if not report.security_ok:
        logger.warning("Equilibrium violates the security constraint: max|eta| = %.4f rad", max_eta)
    logger.info("Equilibrium of '%s' via %s (residual %.2e, ok=%s)", scenario.name, path, error, report.ok)
    return snapshot, report
