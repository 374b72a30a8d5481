"""
Small networks and scenarios shared by the tests.
"""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from typing import Optional, Sequence

from gridfreq.devices.blocks import LinearDamping, StaticDemand, StaticSupply
from gridfreq.network import Bus, BusKind, CommLink, Line, NetworkModel
from gridfreq.oslc import QuadraticCost
from gridfreq.scenarios import bundled_scenario_path, load_scenario
from gridfreq.simulation.state import Disturbance, Scenario, SimConfig


def generator(bus_id: str, inertia: float = 2.0, cost: float = 1.0, damping: float = 1.0, gamma: float = 1.0) -> Bus:
    """Generator bus with a static supply and linear damping."""
    devices = [StaticSupply(QuadraticCost(cost))]
    if damping > 0:
        devices.append(LinearDamping(damping))
    return Bus(id=bus_id, kind=BusKind.GENERATOR, inertia=inertia, gamma=gamma, devices=tuple(devices))


def load(bus_id: str, damping: float = 1.0, cost: Optional[float] = None) -> Bus:
    """Load bus with linear damping and an optional static demand."""
    devices = []
    if cost is not None:
        devices.append(StaticDemand(QuadraticCost(cost)))
    devices.append(LinearDamping(damping))
    return Bus(id=bus_id, kind=BusKind.LOAD, devices=tuple(devices))


def chain(buses: Sequence[Bus], susceptance: float = 1.0) -> NetworkModel:
    """Buses connected in order by lines and comm links with the same orientation."""
    ids = [b.id for b in buses]
    pairs = list(zip(ids[:-1], ids[1:]))
    return NetworkModel(
        buses=tuple(buses),
        lines=tuple(Line(tail=a, head=b, susceptance=susceptance) for a, b in pairs),
        comm_links=tuple(CommLink(tail=a, head=b) for a, b in pairs),
    )


def two_bus_network(damping: float = 1.0) -> NetworkModel:
    return chain([generator("G1"), load("L2", damping=damping)])


def single_generator_scenario(step: float = 1.0, t_end_s: float = 20.0) -> Scenario:
    """One generator bus, no lines, load step applied from t = 0."""
    network = NetworkModel(buses=(generator("G1"),))
    return Scenario(
        network=network,
        disturbances=(Disturbance(bus="G1", time_s=0.0, delta_pu=step),),
        sim=SimConfig(t_end_s=t_end_s, dt_s=0.01),
        name="single",
    )


def bundled(name: str, t_end_s: float = None) -> Scenario:
    """A bundled scenario, optionally with a shorter horizon."""
    scenario = load_scenario(bundled_scenario_path(name))
    if t_end_s is None:
        return scenario
    sim = scenario.sim.model_copy(update={"t_end_s": t_end_s})
    return scenario.model_copy(update={"sim": sim})
