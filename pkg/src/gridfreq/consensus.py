"""
Distributed power-command dynamics and the load observer.

Direct mode (p^L measured):
    gamma_ij dpsi_ij/dt = p_c_i - p_c_j
    gamma_j  dp_c_j/dt  = -(s_j - p^L_j) - sum_out psi + sum_in psi

Observer mode replaces p^L_j by chi_j, where
    tau_chi dchi_j/dt = b_j - omega_j - p_c_j - chi_j          (generator buses)
    M_j     db_j/dt   = -chi_j + s_j - d^u_j - out_j + in_j    (generator buses)
    chi_j             = s_j - d^u_j - out_j + in_j             (load buses)
"""

import logging
from typing import TYPE_CHECKING, List, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .network import NetworkModel

if TYPE_CHECKING:
    from .simulation.state import SimulationState

logger = logging.getLogger(__name__)


class PowerCommandState(BaseModel):
    """p_c per bus and psi per communication link."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    pc: np.ndarray
    psi: np.ndarray

    @field_validator("pc", "psi", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.asarray(value, dtype=float).reshape(-1)


class ObserverState(BaseModel):
    """b per generator bus, chi per bus (load entries are algebraic)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    b: np.ndarray
    chi: np.ndarray
    tau_chi: np.ndarray

    @field_validator("b", "chi", "tau_chi", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.asarray(value, dtype=float).reshape(-1)

    @field_validator("tau_chi")
    @classmethod
    def _positive(cls, value):
        if np.any(value <= 0):
            raise ValueError("tau_chi must be positive")
        return value


class PowerCommandDerivatives(NamedTuple):
    pc: np.ndarray
    psi: np.ndarray


class ObserverDerivatives(NamedTuple):
    pc: np.ndarray
    psi: np.ndarray
    b: np.ndarray
    chi: np.ndarray
    chi_all: np.ndarray


class ConsensusLayer:
    """
    Precomputed incidence and gains for one network.

    Every bus update uses only its own quantities and the psi of its incident
    links.
    """

    def __init__(self, network: NetworkModel, du_scale: float = 1.0):
        self.network = network
        self.comm_incidence = network.comm_incidence()
        self.line_incidence = network.line_incidence()
        self.gamma = np.array([b.gamma for b in network.buses], dtype=float)
        self.link_gamma = np.array([link.gamma for link in network.comm_links], dtype=float)
        self.gen = network.generator_indices
        self.load = network.load_indices
        self.inertia = np.array([network.buses[i].inertia for i in self.gen], dtype=float)
        self.du_scale = du_scale

    def pc_rhs(self, pc: np.ndarray, psi: np.ndarray, s: np.ndarray, p_L: np.ndarray) -> PowerCommandDerivatives:
        dpsi = -(self.comm_incidence.T @ pc) / self.link_gamma
        dpc = (-(s - p_L) + self.comm_incidence @ psi) / self.gamma
        return PowerCommandDerivatives(dpc, dpsi)

    def load_chi(self, s: np.ndarray, d_u: np.ndarray, net_inflow: np.ndarray) -> np.ndarray:
        """Algebraic chi at load buses."""
        return (s - self.du_scale * d_u + net_inflow)[self.load]

    def observer_rhs(
        self,
        pc: np.ndarray,
        psi: np.ndarray,
        b: np.ndarray,
        chi_gen: np.ndarray,
        tau_chi: np.ndarray,
        s: np.ndarray,
        d_u: np.ndarray,
        net_inflow: np.ndarray,
        omega_gen: np.ndarray,
    ) -> ObserverDerivatives:
        chi = np.empty(len(self.gamma))
        chi[self.gen] = chi_gen
        chi[self.load] = self.load_chi(s, d_u, net_inflow)
        dpc, dpsi = self.pc_rhs(pc, psi, s, chi)
        dchi = (b - omega_gen - pc[self.gen] - chi_gen) / tau_chi
        local = s - self.du_scale * d_u + net_inflow
        db = (-chi_gen + local[self.gen]) / self.inertia
        return ObserverDerivatives(dpc, dpsi, db, dchi, chi)


class _LayerCache:
    """Most recent layer, reused while the same network object is passed in."""

    def __init__(self):
        self._layer: Optional[ConsensusLayer] = None

    def get(self, network: NetworkModel, du_scale: float) -> ConsensusLayer:
        layer = self._layer
        if layer is None or layer.network is not network or layer.du_scale != du_scale:
            layer = ConsensusLayer(network, du_scale=du_scale)
            self._layer = layer
        return layer


_layers = _LayerCache()


def consensus_layer(network: NetworkModel, du_scale: float = 1.0) -> ConsensusLayer:
    """
    Layer for ``network``. Networks are frozen, so the layer of the last
    network passed in is reused for repeated calls with the same object.
    """
    return _layers.get(network, du_scale)


def pc_rhs(
    state: PowerCommandState,
    s: np.ndarray,
    p_L: np.ndarray,
    network: NetworkModel,
) -> PowerCommandDerivatives:
    """
    Power-command and link-integral derivatives in direct-measurement mode.
    Repeated calls with the same network reuse its ConsensusLayer.

    Args:
        state: p_c per bus and psi per comm link
        s: Net supply p^M - d^c per bus
        p_L: Uncontrollable load step per bus
        network: Network providing the communication graph

    Returns:
        (dp_c/dt, dpsi/dt)
    """
    layer = consensus_layer(network)
    return layer.pc_rhs(state.pc, state.psi, np.asarray(s, dtype=float), np.asarray(p_L, dtype=float))


def observer_rhs(
    commands: PowerCommandState,
    observer: ObserverState,
    s: np.ndarray,
    d_u: np.ndarray,
    flows: np.ndarray,
    omega: np.ndarray,
    network: NetworkModel,
    du_scale: float = 1.0,
) -> ObserverDerivatives:
    """
    Observer-mode derivatives.

    Args:
        commands: p_c and psi
        observer: b and chi at generator buses (``chi`` may also be given per bus;
            load entries are recomputed algebraically)
        s: Net supply per bus
        d_u: Damping output per bus
        flows: Line flows B sin(eta) - p^nom
        omega: Frequency deviation per bus
        network: The network
        du_scale: Observer's model of the damping relative to the plant

    Returns:
        ObserverDerivatives with the full chi vector in ``chi_all``
    """
    layer = consensus_layer(network, du_scale=du_scale)
    chi_gen = observer.chi if len(observer.chi) == len(layer.gen) else observer.chi[layer.gen]
    omega = np.asarray(omega, dtype=float)
    return layer.observer_rhs(
        commands.pc,
        commands.psi,
        observer.b,
        chi_gen,
        observer.tau_chi,
        np.asarray(s, dtype=float),
        np.asarray(d_u, dtype=float),
        layer.line_incidence @ np.asarray(flows, dtype=float),
        omega[layer.gen],
    )


class BalanceReport(BaseModel):
    residuals: dict
    violations: List[str] = []
    tolerance: float

    @property
    def ok(self) -> bool:
        return not self.violations


def equilibrium_balance_check(snapshot: "SimulationState", tol: float = 1e-6, observer: Optional[bool] = None) -> BalanceReport:
    """
    Steady-state balance conditions of an equilibrium.

    sum s* = sum p^L, sum d^u* = 0 and omega* = 0; in observer mode also
    chi*_j = p^L_j. Never raises.
    """
    observer = snapshot.chi is not None if observer is None else observer
    residuals = {
        "supply_balance": abs(float(np.sum(snapshot.s) - np.sum(snapshot.p_L))),
        "damping_sum": abs(float(np.sum(snapshot.d_u))),
        "frequency": float(np.max(np.abs(snapshot.omega), initial=0.0)),
    }
    if observer and snapshot.chi is not None:
        residuals["observer"] = float(np.max(np.abs(snapshot.chi - snapshot.p_L), initial=0.0))
    violations = [name for name, value in residuals.items() if not value <= tol]
    return BalanceReport(residuals=residuals, violations=violations, tolerance=tol)
