"""
Synthetic test networks on random geometric graphs.

Parameter ranges: inertia M in [2, 10] p.u. s^2, line susceptance B in
[5, 20] p.u., damping lambda in [0.5, 2]. Generators are second-order
turbines with lambda_pc = lambda and K in [0.5, 3] (inside K < 8 lambda_pc);
load buses carry a static controllable demand plus linear damping.
"""

import logging
import math
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel

from ..exceptions import ConfigurationError
from .schema import ScenarioFile, parse_scenario_document

logger = logging.getLogger(__name__)

INERTIA_RANGE = (2.0, 10.0)
SUSCEPTANCE_RANGE = (5.0, 20.0)
DAMPING_RANGE = (0.5, 2.0)
TURBINE_GAIN_RANGE = (0.5, 3.0)
GOVERNOR_TAU_RANGE = (0.2, 2.0)
TURBINE_TAU_RANGE = (0.5, 5.0)
DEMAND_COST_RANGE = (1.0, 5.0)


class Preset(BaseModel):
    n_buses: int
    n_generators: int
    disturbances: int
    t_end_s: float
    description: str


PRESETS: Dict[str, Preset] = {
    "synthetic140": Preset(
        n_buses=140,
        n_generators=47,
        disturbances=3,
        t_end_s=100.0,
        description="Synthetic 140-bus network (47 generator, 93 load buses). Not NPCC data.",
    ),
}


def _round(value: float) -> float:
    return float(round(value, 6))


def _connected_geometric_graph(n: int, seed: int) -> nx.Graph:
    radius = min(1.0, math.sqrt(1.5 * math.log(max(n, 2)) / (math.pi * n)))
    graph = nx.random_geometric_graph(n, radius, seed=seed)
    pos = nx.get_node_attributes(graph, "pos")
    components = sorted(nx.connected_components(graph), key=min)
    # join every component to the first one through its closest node pair
    while len(components) > 1:
        base, other = components[0], components[1]
        u, v = min(
            ((a, b) for a in base for b in other),
            key=lambda ab: (math.dist(pos[ab[0]], pos[ab[1]]), ab),
        )
        graph.add_edge(u, v)
        components = sorted(nx.connected_components(graph), key=min)
    for u, v in graph.edges:
        graph.edges[u, v]["length"] = math.dist(pos[u], pos[v])
    return graph


def generate_synthetic_network(
    n_buses: int,
    gen_fraction: float = 1.0 / 3.0,
    seed: int = 0,
    n_generators: Optional[int] = None,
    disturbances: int = 1,
    t_end_s: float = 200.0,
    name: Optional[str] = None,
    description: Optional[str] = None,
) -> ScenarioFile:
    """
    Random connected network with both graphs connected.

    Args:
        n_buses: Number of buses (>= 2)
        gen_fraction: Share of generator buses when n_generators is not given
        seed: Seed for the graph and every parameter draw
        n_generators: Exact number of generator buses
        disturbances: Number of 1 p.u. load steps at t = 1 s on distinct buses
        t_end_s: Simulated horizon
        name: Scenario name

    Returns:
        ScenarioFile; the same arguments give the same file
    """
    if n_buses < 2:
        raise ConfigurationError(f"A synthetic network needs at least 2 buses, got {n_buses}")
    if n_generators is None:
        n_generators = int(round(gen_fraction * n_buses))
    n_generators = min(max(1, n_generators), n_buses)
    disturbances = min(max(0, disturbances), n_buses)

    rng = np.random.default_rng(seed)
    graph = _connected_geometric_graph(n_buses, seed)
    ids = [f"bus{i + 1}" for i in range(n_buses)]
    generators = set(int(i) for i in rng.choice(n_buses, size=n_generators, replace=False))

    def draw(bounds: Tuple[float, float]) -> float:
        return _round(rng.uniform(*bounds))

    buses: List[dict] = []
    for i in range(n_buses):
        lam = draw(DAMPING_RANGE)
        if i in generators:
            buses.append({
                "id": ids[i],
                "kind": "generator",
                "inertia": draw(INERTIA_RANGE),
                "devices": {"supply": {
                    "type": "turbine2",
                    "params": {
                        "K": draw(TURBINE_GAIN_RANGE),
                        "tau_a": draw(GOVERNOR_TAU_RANGE),
                        "tau_b": draw(TURBINE_TAU_RANGE),
                        "lambda": lam,
                        "lambda_pc": lam,
                    },
                }},
            })
        else:
            buses.append({
                "id": ids[i],
                "kind": "load",
                "devices": {
                    "demand": {"type": "static", "cost": {"coefficient": draw(DEMAND_COST_RANGE)}},
                    "damping": {"type": "linear", "params": {"gain": lam}},
                },
            })

    edges = sorted((min(u, v), max(u, v)) for u, v in graph.edges)
    lines = [
        {"from": ids[u], "to": ids[v], "susceptance": draw(SUSCEPTANCE_RANGE)}
        for u, v in edges
    ]
    tree = nx.minimum_spanning_tree(graph, weight="length")
    comm_links = [
        {"from": ids[u], "to": ids[v]}
        for u, v in sorted((min(u, v), max(u, v)) for u, v in tree.edges)
    ]
    stepped = sorted(int(i) for i in rng.choice(n_buses, size=disturbances, replace=False))

    document = {
        "name": name or f"synthetic{n_buses}_seed{seed}",
        "description": description or f"Synthetic {n_buses}-bus network, seed {seed}. Not NPCC data.",
        "buses": buses,
        "lines": lines,
        "comm_links": comm_links,
        "disturbances": [{"bus": ids[i], "time_s": 1.0, "delta_pu": 1.0} for i in stepped],
        "sim": {"t_end_s": t_end_s, "dt_s": 0.01, "method": "rk4", "decimation": 10},
    }
    logger.info("Generated %d-bus network with %d generators and %d lines (seed %d)",
                n_buses, n_generators, len(lines), seed)
    return parse_scenario_document(document)


def preset_network(preset: str, seed: int = 0) -> ScenarioFile:
    """
    Network for a named preset.

    Raises:
        ConfigurationError: For an unknown preset name
    """
    if preset not in PRESETS:
        raise ConfigurationError(f"Unknown preset '{preset}'; available: {', '.join(sorted(PRESETS))}")
    p = PRESETS[preset]
    return generate_synthetic_network(
        p.n_buses,
        seed=seed,
        n_generators=p.n_generators,
        disturbances=p.disturbances,
        t_end_s=p.t_end_s,
        name=preset,
        description=p.description,
    )
