"""
Energy-like Lyapunov function of the closed loop, evaluated along trajectories.

    V   = V_F + V_P + V_C + V_psi + V_D (+ V_b in observer mode)
    V_F = 1/2 sum_G M (omega - omega*)^2
    V_P = sum_lines B [-cos eta + cos eta* - (eta - eta*) sin eta*]
    V_C = 1/2 sum_N gamma (p_c - p_c*)^2
    V_psi = 1/2 sum_links gamma_ij (psi - psi*)^2
    V_D = sum_N x~' P_j x~
    V_b = 1/2 sum_G [M ((b - b*) - (omega - omega*))^2 + tau_chi (chi - chi*)^2]
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, computed_field

from ..certification.dissipativity import bus_storage
from .state import LyapunovBreakdown, Scenario, SimulationState, StateLayout, Trajectory

logger = logging.getLogger(__name__)


def bus_storages(scenario: Scenario, equilibrium: Optional[SimulationState] = None) -> Tuple[Dict[int, np.ndarray], bool, List[str]]:
    """
    Device-state storage matrix per bus index.

    Returns:
        (storages, complete, notes) where ``complete`` is False when some bus
        with device states has no storage
    """
    storages: Dict[int, np.ndarray] = {}
    notes: List[str] = []
    complete = True
    for j, bus in enumerate(scenario.network.buses):
        pc = 0.0 if equilibrium is None else float(equilibrium.pc[j])
        P, source = bus_storage(bus, equilibrium=(0.0, pc))
        if P is None:
            complete = False
            notes.append(f"bus '{bus.id}': {source}")
            continue
        storages[j] = P
    if not complete:
        logger.warning("Storage missing on %d bus(es); V_D is partial and monotonicity is not asserted", len(notes))
    return storages, complete, notes


def potential_energy(eta: np.ndarray, eta_star: np.ndarray, susceptance: np.ndarray) -> float:
    """Closed form of sum B * int_{eta*}^{eta} (sin t - sin eta*) dt."""
    return float(np.sum(susceptance * (-np.cos(eta) + np.cos(eta_star) - (eta - eta_star) * np.sin(eta_star))))


class LyapunovEvaluator:
    """Precomputed weights for evaluating V on one scenario."""

    def __init__(self, scenario: Scenario, equilibrium: SimulationState, storages: Optional[Dict[int, np.ndarray]] = None):
        network = scenario.network
        self.layout = StateLayout(network, observer=scenario.observer)
        self.equilibrium = equilibrium
        self.gen = network.generator_indices
        self.inertia = np.array([network.buses[i].inertia for i in self.gen], dtype=float)
        self.gamma = np.array([b.gamma for b in network.buses], dtype=float)
        self.link_gamma = np.array([link.gamma for link in network.comm_links], dtype=float)
        self.susceptance = np.array([line.susceptance for line in network.lines], dtype=float)
        self.tau_chi = scenario.controller.tau_chi
        self.observer = scenario.observer
        if storages is None:
            storages, self.complete, self.notes = bus_storages(scenario, equilibrium)
        else:
            self.complete = all(
                j in storages for j in range(len(network.buses)) if len(self.layout.bus_states(j))
            )
            self.notes = []
        self.storages = storages

    def evaluate(self, state: SimulationState) -> LyapunovBreakdown:
        eq = self.equilibrium
        L = self.layout
        omega = (state.omega - eq.omega)[self.gen]
        V_D = 0.0
        for j, P in self.storages.items():
            idx = L.bus_states(j)
            if len(idx):
                dx = state.x[idx] - eq.x[idx]
                V_D += float(dx @ P @ dx)

        V_b = 0.0
        if self.observer and state.b is not None:
            b = state.b - eq.b
            chi = (state.chi - eq.chi)[self.gen]
            V_b = 0.5 * float(np.sum(self.inertia * (b - omega) ** 2 + self.tau_chi * chi ** 2))

        return LyapunovBreakdown(
            V_F=0.5 * float(np.sum(self.inertia * omega ** 2)),
            V_P=potential_energy(state.eta, eq.eta, self.susceptance),
            V_C=0.5 * float(np.sum(self.gamma * (state.pc - eq.pc) ** 2)),
            V_psi=0.5 * float(np.sum(self.link_gamma * (state.psi - eq.psi) ** 2)),
            V_D=V_D,
            V_b=V_b,
            storage_complete=self.complete,
        )


def lyapunov_breakdown(
    state: SimulationState,
    scenario: Scenario,
    equilibrium: SimulationState,
    storages: Optional[Dict[int, np.ndarray]] = None,
) -> LyapunovBreakdown:
    """Components of V at one snapshot relative to ``equilibrium``."""
    return LyapunovEvaluator(scenario, equilibrium, storages).evaluate(state)


def lyapunov_series(
    trajectory: Trajectory,
    scenario: Scenario,
    equilibrium: SimulationState,
    storages: Optional[Dict[int, np.ndarray]] = None,
) -> List[LyapunovBreakdown]:
    """
    V along every sample of ``trajectory``; the series is also stored on the
    trajectory.
    """
    evaluator = LyapunovEvaluator(scenario, equilibrium, storages)
    series = [evaluator.evaluate(trajectory.sample(k)) for k in range(len(trajectory))]
    trajectory.lyapunov = series
    return series


class MonotonicityReport(BaseModel):
    """
    Largest per-sample increase of V, relative to the reference value, and the
    decay of V over the checked window.
    """

    checked: bool
    reference: float
    max_increase: float
    relative_increase: float
    final_ratio: Optional[float] = None
    tolerance: float
    final_tolerance: float
    reason: Optional[str] = None

    @computed_field
    @property
    def non_increasing(self) -> bool:
        return self.relative_increase <= self.tolerance

    @computed_field
    @property
    def decayed(self) -> bool:
        # reference of zero means the run started at equilibrium
        return self.final_ratio is None or self.final_ratio <= self.final_tolerance

    @computed_field
    @property
    def ok(self) -> bool:
        return not self.checked or (self.non_increasing and self.decayed)


def check_monotone(
    series: List[LyapunovBreakdown],
    start: int = 0,
    rel_tol: float = 1e-6,
    final_tol: float = 1e-3,
) -> MonotonicityReport:
    """
    Check V from sample ``start`` on against its value V0 at ``start``.

    Passes when no step raises V by more than ``rel_tol * V0`` and the last
    sample is at most ``final_tol * V0``. The check is disabled (``checked``
    False) when storage is incomplete.
    """
    values = np.array([v.total for v in series[start:]], dtype=float)
    reference = float(values[0]) if len(values) else 0.0
    increase = float(np.max(np.diff(values), initial=0.0))
    relative = increase / reference if reference > 0 else (0.0 if increase <= 0 else np.inf)
    complete = all(v.storage_complete for v in series)
    report = MonotonicityReport(
        checked=complete,
        reference=reference,
        max_increase=increase,
        relative_increase=relative,
        final_ratio=float(values[-1] / reference) if reference > 0 else None,
        tolerance=rel_tol,
        final_tolerance=final_tol,
        reason=None if complete else "storage missing for some device states",
    )
    if complete and not report.ok:
        logger.warning(
            "Lyapunov check failed: relative increase %.3e (tol %.1e), final ratio %s (tol %.1e)",
            relative, rel_tol, report.final_ratio, final_tol,
        )
    return report
