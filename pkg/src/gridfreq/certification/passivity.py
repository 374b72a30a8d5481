"""
Numerical passivity test of an isolated bus subsystem.

The bus takes u = [outflow - inflow, (psi into the bus) - (psi out of it)]
and returns y = [-omega, p_c]. With the storage

    V = 1/2 M omega~^2 + 1/2 gamma p_c~^2 + x~' P x~

every trajectory must satisfy V(T) - V(0) <= int_0^T u~' y~ dt.
"""

import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.optimize import brentq

from ..devices.base import Role
from ..exceptions import NumericalError
from ..network import Bus, NetworkModel
from ..simulation.engine import rk4_step
from .dissipativity import bus_storage

logger = logging.getLogger(__name__)


class TrialResult(BaseModel):
    storage_change: float
    supplied: float

    @property
    def margin(self) -> float:
        return self.supplied - self.storage_change


class PassivityReport(BaseModel):
    bus: str
    trials: int
    horizon_s: float
    tolerance: float
    skipped: bool = False
    reason: Optional[str] = None
    storage_source: Optional[str] = None
    results: List[TrialResult] = []

    @property
    def failures(self) -> int:
        return sum(1 for r in self.results if r.margin < -self.tolerance)

    @property
    def worst_margin(self) -> Optional[float]:
        return min((r.margin for r in self.results), default=None)

    @property
    def ok(self) -> bool:
        return not self.skipped and self.failures == 0


class BusSubsystem:
    """
    One bus cut out of the network, about the rest point with zero load and
    zero port input.

    State layout: [omega (generator buses only), device states, p_c, supplied energy].
    """

    def __init__(self, bus: Bus):
        self.bus = bus
        self.generator = bus.is_generator
        offset = 1 if self.generator else 0
        self.slices = []
        for block in bus.devices:
            self.slices.append(slice(offset, offset + block.n_states))
            offset += block.n_states
        self.devices = slice(1 if self.generator else 0, offset)
        self.pc = offset
        self.energy = offset + 1
        self.size = offset + 2
        self.rest = self._rest_point()
        self._omega = 0.0

    def _rest_point(self) -> np.ndarray:
        x = np.zeros(self.size)
        for block, s in zip(self.bus.devices, self.slices):
            x[s], _ = block.equilibrium(np.zeros(2))
        return x

    def _outputs(self, x: np.ndarray, omega: float) -> Tuple[float, float]:
        zeta = np.array([-omega, x[self.pc]])
        s = d_u = 0.0
        for block, sl in zip(self.bus.devices, self.slices):
            y = float(block.output(x[sl], zeta))
            if block.role is Role.SUPPLY:
                s += y
            elif block.role is Role.DEMAND:
                s -= y
            else:
                d_u += y
        return s, d_u

    def _load_omega(self, x: np.ndarray, u1: float) -> float:
        def balance(w: float) -> float:
            s, d_u = self._outputs(x, w)
            return s - d_u - u1

        lo, hi = self._omega - 1.0, self._omega + 1.0
        for _ in range(60):
            if balance(lo) >= 0 >= balance(hi):
                break
            lo, hi = lo - (hi - lo), hi + (hi - lo)
        else:
            raise NumericalError("Could not bracket the load-bus frequency")
        self._omega = brentq(balance, lo, hi, xtol=1e-14)
        return self._omega

    def reset(self) -> None:
        self._omega = 0.0

    def omega(self, x: np.ndarray, u1: float) -> float:
        return float(x[0]) if self.generator else self._load_omega(x, u1)

    def rhs(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        omega = self.omega(x, u[0])
        zeta = np.array([-omega, x[self.pc]])
        dx = np.zeros(self.size)
        for block, sl in zip(self.bus.devices, self.slices):
            if block.n_states:
                dx[sl] = block.derivative(x[sl], zeta)
        s, d_u = self._outputs(x, omega)
        if self.generator:
            dx[0] = (s - d_u - u[0]) / self.bus.inertia
        dx[self.pc] = (-s + u[1]) / self.bus.gamma
        y = np.array([-omega, x[self.pc]])
        dx[self.energy] = float(u @ y)
        return dx

    def storage(self, x: np.ndarray, P: np.ndarray) -> float:
        dev = x - self.rest
        value = 0.5 * self.bus.gamma * dev[self.pc] ** 2
        if self.generator:
            value += 0.5 * self.bus.inertia * dev[0] ** 2
        xd = dev[self.devices]
        return float(value + xd @ P @ xd)


def random_input(rng: np.random.Generator, amplitude: float, harmonics: int = 3) -> Callable[[float], np.ndarray]:
    """Sum of ``harmonics`` sinusoids per channel, bounded by ``amplitude``."""
    amps = rng.uniform(-amplitude, amplitude, size=(2, harmonics)) / harmonics
    freqs = rng.uniform(0.1, 5.0, size=(2, harmonics))
    phases = rng.uniform(0.0, 2 * np.pi, size=(2, harmonics))

    def u(t: float) -> np.ndarray:
        return np.sum(amps * np.sin(freqs * t + phases), axis=1)

    return u


def check_bus_passivity(
    network: NetworkModel,
    bus_id: str,
    horizon: float = 20.0,
    trials: int = 100,
    seed: int = 0,
    dt: float = 1e-2,
    amplitude: float = 0.5,
    initial_scale: float = 0.1,
    zero_input: bool = False,
    tol: float = 1e-6,
) -> PassivityReport:
    """
    Monte-Carlo check of the dissipation inequality on one bus.

    Args:
        network: Network containing the bus
        bus_id: Bus to test
        horizon: Length of each trial (s)
        trials: Number of random trials
        seed: Seed of the input and initial-state draws
        dt: RK4 step
        amplitude: Bound on each input channel
        initial_scale: Standard deviation of the initial offset from rest
        zero_input: Use u = 0 (storage must then be non-increasing)
        tol: Allowed violation of the inequality

    Returns:
        PassivityReport; skipped with a reason when no storage is available
    """
    bus = network.bus(bus_id)
    report = PassivityReport(bus=bus_id, trials=trials, horizon_s=horizon, tolerance=tol)
    P, source = bus_storage(bus)
    report.storage_source = source
    if P is None:
        report.skipped = True
        report.reason = f"no storage for the device states: {source}"
        logger.warning("Passivity check of bus '%s' skipped: %s", bus_id, report.reason)
        return report

    subsystem = BusSubsystem(bus)
    rng = np.random.default_rng(seed)
    steps = max(1, int(np.ceil(horizon / dt - 1e-9)))
    h = horizon / steps
    for _ in range(trials):
        u = (lambda t: np.zeros(2)) if zero_input else random_input(rng, amplitude)
        x = subsystem.rest.copy()
        x[:subsystem.pc + 1] += rng.normal(0.0, initial_scale, size=subsystem.pc + 1)
        subsystem.reset()
        v0 = subsystem.storage(x, P)
        fun = lambda t, state: subsystem.rhs(state, u(t))  # noqa: E731
        t = 0.0
        for _ in range(steps):
            x = rk4_step(fun, t, x, h)
            t += h
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"Non-finite state in passivity trial on bus '{bus_id}'")
        report.results.append(TrialResult(storage_change=subsystem.storage(x, P) - v0, supplied=float(x[subsystem.energy])))

    logger.info("Bus '%s' passivity: %d/%d trials within tolerance (worst margin %.3e)",
                bus_id, trials - report.failures, trials, report.worst_margin or 0.0)
    return report
