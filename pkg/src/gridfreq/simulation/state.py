"""
Scenario, state layout, snapshots and trajectories.

The flat state vector is ordered
    [eta (lines), omega (generator buses), device states, p_c (buses),
     psi (comm links), b (generator buses), chi (generator buses)]
with the observer blocks present only in observer mode.
"""

from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from ..devices.base import DeviceBlock
from ..network import NetworkModel


class ControllerMode(str, Enum):
    DIRECT = "direct"
    OBSERVER = "observer"


class ControllerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: ControllerMode = ControllerMode.DIRECT
    tau_chi: float = Field(default=1.0, gt=0, description="Observer time constant (s)")
    du_scale: float = Field(default=1.0, gt=0, description="Observer damping model relative to the plant")
    price_function: str = "p_c - omega"


class Disturbance(BaseModel):
    """Step change of the uncontrollable load p^L at one bus."""

    model_config = ConfigDict(frozen=True)

    bus: str
    time_s: float = Field(ge=0)
    delta_pu: float


class IntegrationMethod(str, Enum):
    RK4 = "rk4"
    RK45 = "rk45"


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_end_s: float = Field(default=200.0, gt=0)
    dt_s: float = Field(default=1e-3, gt=0)
    method: IntegrationMethod = IntegrationMethod.RK4
    decimation: int = Field(default=10, ge=1)


class Scenario(BaseModel):
    """Everything needed for one run."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    network: NetworkModel
    controller: ControllerConfig = ControllerConfig()
    disturbances: Tuple[Disturbance, ...] = ()
    sim: SimConfig = SimConfig()
    initial: Dict[str, Dict[str, float]] = {}
    name: str = "scenario"
    source: Optional[Any] = Field(default=None, exclude=True, description="Scenario file the scenario was loaded from")

    @model_validator(mode="after")
    def _events_in_horizon(self) -> "Scenario":
        ids = set(self.network.bus_ids)
        for event in self.disturbances:
            if event.time_s > self.sim.t_end_s:
                raise ValueError(f"disturbance at {event.time_s} s is after t_end = {self.sim.t_end_s} s")
            if event.bus not in ids:
                raise ValueError(f"disturbance references unknown bus '{event.bus}'")
        return self

    @property
    def observer(self) -> bool:
        return self.controller.mode is ControllerMode.OBSERVER

    def load_at(self, t: float) -> np.ndarray:
        """p^L per bus with every event at time <= t applied."""
        index = self.network.bus_index()
        load = np.zeros(len(index))
        for event in self.disturbances:
            if event.time_s <= t:
                load[index[event.bus]] += event.delta_pu
        return load

    def final_load(self) -> np.ndarray:
        return self.load_at(np.inf)

    def event_times(self) -> List[float]:
        return sorted({e.time_s for e in self.disturbances if 0.0 < e.time_s < self.sim.t_end_s})


class DeviceSlot(NamedTuple):
    bus: int
    block: DeviceBlock
    states: slice


class StateLayout:
    """Index bookkeeping for the flat state vector."""

    def __init__(self, network: NetworkModel, observer: bool = False):
        n_lines = len(network.lines)
        n_gen = len(network.generator_indices)
        n_bus = len(network.buses)
        n_links = len(network.comm_links)

        offset = 0

        def take(n: int) -> slice:
            nonlocal offset
            s = slice(offset, offset + n)
            offset += n
            return s

        self.eta = take(n_lines)
        self.omega = take(n_gen)
        start = offset
        self.slots: List[DeviceSlot] = []
        for i, bus in enumerate(network.buses):
            for block in bus.devices:
                self.slots.append(DeviceSlot(i, block, take(block.n_states)))
        self.devices = slice(start, offset)
        self.pc = take(n_bus)
        self.psi = take(n_links)
        self.b = take(n_gen if observer else 0)
        self.chi = take(n_gen if observer else 0)
        self.size = offset
        self.observer = observer

    def bus_states(self, bus: int) -> np.ndarray:
        """Flat indices of the device states attached to ``bus``."""
        parts = [np.arange(s.states.start, s.states.stop) for s in self.slots if s.bus == bus]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=int)


class SimulationState(BaseModel):
    """
    One sampled point: the raw state plus derived quantities, all per bus
    except eta/flows (per line) and psi (per comm link).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    t: float
    x: np.ndarray
    eta: np.ndarray
    omega: np.ndarray
    pc: np.ndarray
    psi: np.ndarray
    flows: np.ndarray
    p_M: np.ndarray
    d_c: np.ndarray
    d_u: np.ndarray
    p_L: np.ndarray
    b: Optional[np.ndarray] = None
    chi: Optional[np.ndarray] = None

    @property
    def s(self) -> np.ndarray:
        return self.p_M - self.d_c


class LyapunovBreakdown(BaseModel):
    V_F: float = 0.0
    V_P: float = 0.0
    V_C: float = 0.0
    V_psi: float = 0.0
    V_D: float = 0.0
    V_b: float = 0.0
    storage_complete: bool = True

    @computed_field
    @property
    def total(self) -> float:
        return self.V_F + self.V_P + self.V_C + self.V_psi + self.V_D + self.V_b


class Trajectory(BaseModel):
    """Sampled run. Arrays are indexed [sample, bus] (or [sample, line])."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    bus_ids: List[str]
    t: np.ndarray
    x: np.ndarray
    omega: np.ndarray
    pc: np.ndarray
    p_M: np.ndarray
    d_c: np.ndarray
    d_u: np.ndarray
    p_L: np.ndarray
    eta: np.ndarray
    flows: np.ndarray
    psi: np.ndarray
    chi: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    lyapunov: Optional[List[LyapunovBreakdown]] = None
    metadata: Dict[str, Any] = {}

    @property
    def s(self) -> np.ndarray:
        return self.p_M - self.d_c

    def __len__(self) -> int:
        return len(self.t)

    def sample(self, k: int) -> SimulationState:
        return SimulationState(
            t=float(self.t[k]),
            x=self.x[k],
            eta=self.eta[k],
            omega=self.omega[k],
            pc=self.pc[k],
            psi=self.psi[k],
            flows=self.flows[k],
            p_M=self.p_M[k],
            d_c=self.d_c[k],
            d_u=self.d_u[k],
            p_L=self.p_L[k],
            b=None if self.b is None else self.b[k],
            chi=None if self.chi is None else self.chi[k],
        )

    @property
    def final(self) -> SimulationState:
        return self.sample(len(self.t) - 1)

    @classmethod
    def from_states(cls, bus_ids: List[str], states: List[SimulationState]) -> "Trajectory":
        def stack(name: str):
            values = [getattr(s, name) for s in states]
            if values[0] is None:
                return None
            return np.array(values, dtype=float)

        fields = ("x", "omega", "pc", "p_M", "d_c", "d_u", "p_L", "eta", "flows", "psi", "chi", "b")
        return cls(bus_ids=list(bus_ids), t=np.array([s.t for s in states]), **{f: stack(f) for f in fields})
