"""
Physical power graph and communication graph.

Powers are in p.u. on the network's MVA base; frequency deviations are rad/s.
"""

import logging
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict

from .devices.base import DeviceBlock, Role
from .exceptions import NumericalError

logger = logging.getLogger(__name__)


class BusKind(str, Enum):
    GENERATOR = "generator"
    LOAD = "load"


class Bus(BaseModel):
    """
    A bus with its device bindings.

    Generator buses carry inertia M_j and a swing equation; load buses are
    algebraic and must have instantaneous frequency damping.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str
    kind: BusKind
    inertia: Optional[float] = None
    gamma: float = 1.0
    devices: Tuple[DeviceBlock, ...] = ()

    @property
    def is_generator(self) -> bool:
        return self.kind is BusKind.GENERATOR

    def blocks(self, role: Role) -> List[DeviceBlock]:
        return [d for d in self.devices if d.role is role]


class Line(BaseModel):
    """Transmission line oriented tail -> head."""

    model_config = ConfigDict(frozen=True)

    tail: str
    head: str
    susceptance: float
    nominal_flow: float = 0.0


class CommLink(BaseModel):
    """Communication link carrying the integral state psi."""

    model_config = ConfigDict(frozen=True)

    tail: str
    head: str
    gamma: float = 1.0


class ValidationReport(BaseModel):
    violations: List[str] = []

    @property
    def ok(self) -> bool:
        return not self.violations


class NetworkModel(BaseModel):
    """Buses, lines and communication links. Immutable once built."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...] = ()
    comm_links: Tuple[CommLink, ...] = ()
    base_mva: float = 100.0

    @property
    def bus_ids(self) -> List[str]:
        return [b.id for b in self.buses]

    def bus_index(self) -> Dict[str, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    def bus(self, bus_id: str) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    @property
    def generator_indices(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses) if b.is_generator], dtype=int)

    @property
    def load_indices(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses) if not b.is_generator], dtype=int)

    def physical_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.bus_ids)
        graph.add_edges_from((line.tail, line.head) for line in self.lines)
        return graph

    def comm_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.bus_ids)
        graph.add_edges_from((link.tail, link.head) for link in self.comm_links)
        return graph

    def _incidence(self, edges: Sequence[Tuple[str, str]]) -> np.ndarray:
        if not edges:
            return np.zeros((len(self.buses), 0))
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.bus_ids)
        keyed = [(u, v, graph.add_edge(u, v)) for u, v in edges]
        # oriented: -1 at the tail, +1 at the head
        return nx.incidence_matrix(graph, nodelist=self.bus_ids, edgelist=keyed, oriented=True).toarray()

    def line_incidence(self) -> np.ndarray:
        """E with E @ flows = (sum of inflows - sum of outflows) per bus."""
        return self._incidence([(line.tail, line.head) for line in self.lines])

    def comm_incidence(self) -> np.ndarray:
        """Same orientation convention over the communication links."""
        return self._incidence([(link.tail, link.head) for link in self.comm_links])


def line_flow(eta: float, line: Line) -> float:
    """
    Power deviation carried from tail to head.

    Args:
        eta: Angle difference state of the line (rad)
        line: The line

    Returns:
        B_ij sin(eta) - p^nom_ij in p.u.
    """
    return line.susceptance * np.sin(eta) - line.nominal_flow


def line_flows(eta: np.ndarray, network: NetworkModel) -> np.ndarray:
    """Vectorized line_flow over every line of ``network``."""
    susceptance = np.array([line.susceptance for line in network.lines], dtype=float)
    nominal = np.array([line.nominal_flow for line in network.lines], dtype=float)
    return susceptance * np.sin(eta) - nominal


def bus_imbalance(
    bus: Bus,
    p_L: float,
    s: float,
    d_u: float,
    inflows: Iterable[float] = (),
    outflows: Iterable[float] = (),
) -> float:
    """
    Power imbalance at a bus: -p_L + s - d_u - sum(outflows) + sum(inflows).

    Equals M_j domega/dt at generator buses and must vanish at load buses.
    """
    return -p_L + s - d_u - float(sum(outflows)) + float(sum(inflows))


def _damping_feedthrough(bus: Bus) -> float:
    total = 0.0
    for block in bus.blocks(Role.DAMPING):
        total += block.omega_feedthrough()
    return total


def validate(network: NetworkModel) -> ValidationReport:
    """
    Check the structural assumptions the dynamics rely on.

    Never raises; every violation is listed in the returned report.
    """
    violations: List[str] = []
    ids = network.bus_ids
    seen = set()
    for bus_id in ids:
        if bus_id in seen:
            violations.append(f"duplicate bus id '{bus_id}'")
        seen.add(bus_id)

    for bus in network.buses:
        if bus.is_generator:
            if bus.inertia is None or not bus.inertia > 0:
                violations.append(f"generator bus '{bus.id}' needs inertia M > 0, got {bus.inertia}")
        else:
            if bus.inertia is not None:
                violations.append(f"load bus '{bus.id}' must not declare inertia")
            if bus.blocks(Role.SUPPLY):
                violations.append(f"load bus '{bus.id}' cannot host a supply block")
            try:
                gain = _damping_feedthrough(bus)
            except NumericalError as e:
                violations.append(f"algebraic bus unsolvable at '{bus.id}': {e}")
            else:
                if not gain > 0:
                    violations.append(
                        f"algebraic bus unsolvable at '{bus.id}': frequency damping gain {gain:.3g} is not positive"
                    )
        if not bus.gamma > 0:
            violations.append(f"bus '{bus.id}' needs gamma > 0, got {bus.gamma}")

    pairs = set()
    for k, line in enumerate(network.lines):
        for end in (line.tail, line.head):
            if end not in seen:
                violations.append(f"line {k} references unknown bus '{end}'")
        if line.tail == line.head:
            violations.append(f"line {k} is a self-loop at '{line.tail}'")
        if not line.susceptance > 0:
            violations.append(f"line {k} needs susceptance B > 0, got {line.susceptance}")
        if (line.tail, line.head) in pairs:
            violations.append(f"line {k} duplicates ({line.tail}, {line.head})")
        elif (line.head, line.tail) in pairs:
            violations.append(f"line {k} is bidirectional with ({line.head}, {line.tail})")
        pairs.add((line.tail, line.head))

    links = set()
    for k, link in enumerate(network.comm_links):
        for end in (link.tail, link.head):
            if end not in seen:
                violations.append(f"comm link {k} references unknown bus '{end}'")
        if not link.gamma > 0:
            violations.append(f"comm link {k} needs gamma > 0, got {link.gamma}")
        key = frozenset((link.tail, link.head))
        if key in links:
            violations.append(f"comm link {k} duplicates ({link.tail}, {link.head})")
        links.add(key)

    if ids and not nx.is_connected(network.physical_graph()):
        violations.append("physical graph disconnected")
    if ids and not nx.is_connected(network.comm_graph()):
        violations.append("communication graph disconnected")

    if violations:
        logger.info("Network validation found %d violation(s)", len(violations))
    return ValidationReport(violations=violations)
