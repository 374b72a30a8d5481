"""
Closed-loop simulation of the swing, device and power-command dynamics.

Load buses are algebraic: their frequency is solved from the power balance
inside every right-hand-side evaluation, so the integrator only sees the
differential states.
"""

import logging
import math
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from ..consensus import ConsensusLayer
from ..devices.base import DeviceBlock, Role
from ..exceptions import NumericalError
from ..network import NetworkModel, line_flows
from .state import (
    DeviceSlot,
    IntegrationMethod,
    Scenario,
    SimulationState,
    StateLayout,
    Trajectory,
)

logger = logging.getLogger(__name__)

LOAD_TOL = 1e-11
NEWTON_ITERATIONS = 30


def rk4_step(fun: Callable[[float, np.ndarray], np.ndarray], t: float, x: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of dx/dt = fun(t, x)."""
    k1 = fun(t, x)
    k2 = fun(t + h / 2, x + 0.5 * h * k1)
    k3 = fun(t + h / 2, x + 0.5 * h * k2)
    k4 = fun(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class DeviceBank:
    """
    Blocks of one class evaluated together.

    Stackable blocks share one call with array parameters; any other block is a
    bank of one evaluated with scalar inputs.
    """

    def __init__(self, block: DeviceBlock, slots: List[DeviceSlot], vectorized: bool):
        self.block = block
        self.role = block.role
        self.buses = np.array([s.bus for s in slots], dtype=int)
        n = block.n_states
        self.index = np.array(
            [[s.states.start + r for s in slots] for r in range(n)], dtype=int
        ).reshape(n, len(slots))
        self.vectorized = vectorized

    def _inputs(self, X: np.ndarray, omega: np.ndarray, pc: np.ndarray):
        x = X[self.index]
        zeta = (-omega[self.buses], pc[self.buses])
        if self.vectorized:
            return x, zeta
        return x[:, 0], (float(zeta[0][0]), float(zeta[1][0]))

    def output(self, X: np.ndarray, omega: np.ndarray, pc: np.ndarray) -> np.ndarray:
        x, zeta = self._inputs(X, omega, pc)
        return np.asarray(self.block.output(x, zeta), dtype=float).reshape(-1)

    def evaluate(self, X: np.ndarray, omega: np.ndarray, pc: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x, zeta = self._inputs(X, omega, pc)
        dx = np.asarray(self.block.derivative(x, zeta), dtype=float).reshape(self.index.shape)
        y = np.asarray(self.block.output(x, zeta), dtype=float).reshape(-1)
        return dx, y


def build_banks(slots: List[DeviceSlot], network: NetworkModel) -> List[DeviceBank]:
    groups: Dict[tuple, List[DeviceSlot]] = {}
    for slot in slots:
        key = (type(slot.block), slot.block.role, network.buses[slot.bus].is_generator)
        groups.setdefault(key, []).append(slot)

    banks = []
    for (cls, _, _), members in groups.items():
        blocks = [m.block for m in members]
        if cls.can_stack(blocks):
            banks.append(DeviceBank(cls.stack(blocks), members, vectorized=True))
        else:
            banks.extend(DeviceBank(m.block, [m], vectorized=False) for m in members)
    return banks


class Evaluation(NamedTuple):
    derivative: np.ndarray
    state: SimulationState


class SimulationEngine:
    """
    Right-hand side, load-frequency solve and integrators for one scenario.

    A single engine is sequential and deterministic; create one per run.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        network = scenario.network
        self.network = network
        self.layout = StateLayout(network, observer=scenario.observer)
        self.consensus = ConsensusLayer(network, du_scale=scenario.controller.du_scale)
        self.E = self.consensus.line_incidence
        self.gen = network.generator_indices
        self.load = network.load_indices
        self.inertia = np.array([network.buses[i].inertia for i in self.gen], dtype=float)
        self.tau_chi = np.full(len(self.gen), scenario.controller.tau_chi)
        self.n_bus = len(network.buses)

        self.banks = build_banks(self.layout.slots, network)
        self.load_banks = [
            b for b in self.banks
            if not network.buses[b.buses[0]].is_generator and b.role is not Role.SUPPLY
        ]
        self._omega_load = np.zeros(len(self.load))
        logger.debug(
            "Engine for '%s': %d states, %d device banks", scenario.name, self.layout.size, len(self.banks)
        )

    # -- algebraic load buses -------------------------------------------

    def _load_residual(self, X: np.ndarray, omega: np.ndarray, pc: np.ndarray, base: np.ndarray) -> np.ndarray:
        demand = np.zeros(self.n_bus)
        for bank in self.load_banks:
            np.add.at(demand, bank.buses, bank.output(X, omega, pc))
        return base - demand[self.load]

    def solve_load_frequency(
        self,
        X: np.ndarray,
        p_L: np.ndarray,
        net_inflow: np.ndarray,
        omega: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """
        Frequency at every load bus from 0 = -p^L - d^c - d^u + inflow - outflow.

        Safeguarded Newton per bus (each residual depends only on its own
        frequency), warm-started from the previous solve, with bracketing
        bisection as the fallback.

        Raises:
            NumericalError: When neither method reaches the tolerance
        """
        if len(self.load) == 0:
            return np.zeros(0)
        pc = X[self.layout.pc]
        omega = np.zeros(self.n_bus) if omega is None else omega.copy()
        base = (-p_L + net_inflow)[self.load]

        def residual(w: np.ndarray) -> np.ndarray:
            omega[self.load] = w
            return self._load_residual(X, omega, pc, base)

        w = self._omega_load.copy()
        r = residual(w)
        for _ in range(NEWTON_ITERATIONS):
            if np.max(np.abs(r)) <= LOAD_TOL:
                self._omega_load = w
                return w
            h = 1e-7 * (1.0 + np.abs(w))
            slope = np.minimum((residual(w + h) - r) / h, -1e-12)
            w = w - r / slope
            r = residual(w)

        w = self._bisect_load(residual, w)
        r = residual(w)
        if not np.max(np.abs(r)) <= 1e3 * LOAD_TOL:
            raise NumericalError("Load-bus frequency solve diverged", residual=float(np.max(np.abs(r))))
        self._omega_load = w
        return w

    @staticmethod
    def _bisect_load(residual: Callable[[np.ndarray], np.ndarray], guess: np.ndarray) -> np.ndarray:
        # residual is decreasing in each load frequency
        lo, hi = guess - 1.0, guess + 1.0
        for _ in range(60):
            rlo = residual(lo)
            rhi = residual(hi)
            if np.all(rlo >= 0) and np.all(rhi <= 0):
                break
            lo = np.where(rlo < 0, lo - 2.0 * (hi - lo), lo)
            hi = np.where(rhi > 0, hi + 2.0 * (hi - lo), hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            r = residual(mid)
            lo = np.where(r > 0, mid, lo)
            hi = np.where(r > 0, hi, mid)
        return 0.5 * (lo + hi)

    # -- right-hand side ------------------------------------------------

    def evaluate(self, X: np.ndarray, p_L: np.ndarray, t: float = 0.0) -> Evaluation:
        """Derivative of the flat state and the derived snapshot at ``X``."""
        L = self.layout
        eta = X[L.eta]
        pc = X[L.pc]
        psi = X[L.psi]
        flows = line_flows(eta, self.network)
        net_inflow = self.E @ flows

        omega = np.zeros(self.n_bus)
        omega[self.gen] = X[L.omega]
        omega[self.load] = self.solve_load_frequency(X, p_L, net_inflow, omega)

        dX = np.zeros(L.size)
        totals = {role: np.zeros(self.n_bus) for role in Role}
        for bank in self.banks:
            dx, y = bank.evaluate(X, omega, pc)
            if dx.size:
                dX[bank.index] = dx
            np.add.at(totals[bank.role], bank.buses, y)
        p_M, d_c, d_u = totals[Role.SUPPLY], totals[Role.DEMAND], totals[Role.DAMPING]
        s = p_M - d_c

        dX[L.eta] = -(self.E.T @ omega)
        dX[L.omega] = (-p_L + s - d_u + net_inflow)[self.gen] / self.inertia

        b = chi = None
        if L.observer:
            b = X[L.b]
            out = self.consensus.observer_rhs(
                pc, psi, b, X[L.chi], self.tau_chi, s, d_u, net_inflow, omega[self.gen]
            )
            dX[L.pc], dX[L.psi], dX[L.b], dX[L.chi] = out.pc, out.psi, out.b, out.chi
            chi = out.chi_all
        else:
            dX[L.pc], dX[L.psi] = self.consensus.pc_rhs(pc, psi, s, p_L)

        state = SimulationState(
            t=t, x=X.copy(), eta=eta.copy(), omega=omega, pc=pc.copy(), psi=psi.copy(), flows=flows,
            p_M=p_M, d_c=d_c, d_u=d_u, p_L=np.asarray(p_L, dtype=float).copy(),
            b=None if b is None else b.copy(), chi=chi,
        )
        return Evaluation(dX, state)

    def rhs(self, X: np.ndarray, p_L: np.ndarray) -> np.ndarray:
        return self.evaluate(X, p_L).derivative

    # -- states ---------------------------------------------------------

    def initial_state(self) -> np.ndarray:
        """All-zero deviations with the scenario's per-variable overrides applied."""
        L = self.layout
        X = np.zeros(L.size)
        index = self.network.bus_index()
        gen_pos = {int(i): k for k, i in enumerate(self.gen)}
        for name, values in self.scenario.initial.items():
            for key, value in values.items():
                if name == "eta":
                    X[L.eta.start + int(key)] = value
                elif name == "psi":
                    X[L.psi.start + int(key)] = value
                elif name == "pc":
                    X[L.pc.start + index[key]] = value
                elif name in ("omega", "b", "chi"):
                    block = getattr(L, name)
                    X[block.start + gen_pos[index[key]]] = value
                else:
                    raise KeyError(f"unknown initial-state variable '{name}'")
        return X

    # -- integration ----------------------------------------------------

    def rk4_step(self, X: np.ndarray, h: float, p_L: np.ndarray) -> np.ndarray:
        return rk4_step(lambda t, y: self.rhs(y, p_L), 0.0, X, h)

    def segments(self) -> List[Tuple[float, float]]:
        edges = [0.0] + self.scenario.event_times() + [self.scenario.sim.t_end_s]
        return list(zip(edges[:-1], edges[1:]))

    def integrate(
        self,
        X0: Optional[np.ndarray] = None,
        equilibrium: Optional[SimulationState] = None,
    ) -> Trajectory:
        """
        Integrate over [0, t_end], splitting steps at disturbance times.

        Args:
            X0: Initial flat state; defaults to the scenario initial state
            equilibrium: Closed-loop equilibrium; when given, the V components
                are evaluated at every stored sample into ``trajectory.lyapunov``.
                Without it the series stays empty until ``lyapunov_series``.

        Raises:
            NumericalError: On a non-finite state; ``last_good`` holds the
                trajectory sampled so far
        """
        sim = self.scenario.sim
        X = self.initial_state() if X0 is None else np.array(X0, dtype=float)
        samples = [self.evaluate(X, self.scenario.load_at(0.0), 0.0).state]
        logger.info(
            "Integrating '%s' to t=%g s (%s, dt=%g s)", self.scenario.name, sim.t_end_s, sim.method.value, sim.dt_s
        )
        if sim.method is IntegrationMethod.RK45:
            self._integrate_adaptive(X, samples)
        else:
            self._integrate_fixed(X, samples)
        trajectory = Trajectory.from_states(self.network.bus_ids, samples)
        trajectory.metadata.update({"method": sim.method.value, "dt_s": sim.dt_s, "decimation": sim.decimation})
        if equilibrium is not None:
            # lyapunov -> certification -> passivity imports this module
            from .lyapunov import LyapunovEvaluator

            evaluator = LyapunovEvaluator(self.scenario, equilibrium)
            trajectory.lyapunov = [evaluator.evaluate(state) for state in samples]
        logger.info("Finished '%s': %d samples, final max|omega| = %.3e",
                    self.scenario.name, len(trajectory), float(np.max(np.abs(trajectory.omega[-1]), initial=0.0)))
        return trajectory

    def _abort(self, samples: List[SimulationState], t: float) -> NumericalError:
        partial = Trajectory.from_states(self.network.bus_ids, samples)
        return NumericalError(f"Non-finite state at t = {t:.6g} s", last_good=partial)

    def _integrate_fixed(self, X: np.ndarray, samples: List[SimulationState]) -> None:
        sim = self.scenario.sim
        segments = self.segments()
        step = 0
        for k, (a, b) in enumerate(segments):
            p_L = self.scenario.load_at(a)
            n = max(1, math.ceil((b - a) / sim.dt_s - 1e-9))
            h = (b - a) / n
            for i in range(n):
                X = self.rk4_step(X, h, p_L)
                step += 1
                t = a + (i + 1) * h
                if not np.all(np.isfinite(X)):
                    raise self._abort(samples, t)
                last = k == len(segments) - 1 and i == n - 1
                if step % sim.decimation == 0 or last:
                    samples.append(self.evaluate(X, p_L, t).state)

    def _integrate_adaptive(self, X: np.ndarray, samples: List[SimulationState]) -> None:
        sim = self.scenario.sim
        spacing = sim.dt_s * sim.decimation
        grid = np.arange(1, int(math.floor(sim.t_end_s / spacing + 1e-9)) + 1) * spacing
        if not len(grid) or grid[-1] < sim.t_end_s - 1e-12:
            grid = np.append(grid, sim.t_end_s)
        for a, b in self.segments():
            p_L = self.scenario.load_at(a)
            t_eval = grid[(grid > a + 1e-12) & (grid <= b + 1e-12)]
            result = solve_ivp(
                lambda t, y: self.rhs(y, p_L), (a, b), X, method="RK45",
                t_eval=np.clip(t_eval, a, b), rtol=1e-8, atol=1e-10, dense_output=True,
            )
            if not result.success:
                raise NumericalError(f"Adaptive integration failed: {result.message}",
                                     last_good=Trajectory.from_states(self.network.bus_ids, samples))
            for t, column in zip(result.t, result.y.T):
                if not np.all(np.isfinite(column)):
                    raise self._abort(samples, t)
                samples.append(self.evaluate(column, p_L, float(t)).state)
            X = result.sol(b)

    def settle(
        self,
        X: np.ndarray,
        p_L: np.ndarray,
        max_time: float,
        tol: Optional[float] = None,
        window: Optional[float] = None,
        dt: Optional[float] = None,
    ) -> Tuple[np.ndarray, bool, float]:
        """
        Integrate with constant load until max|derivative| < tol for ``window`` seconds.

        Returns:
            (final state, settled flag, simulated time used)
        """
        from ..config import get_settings

        settings = get_settings()
        tol = settings.settle_tol if tol is None else tol
        window = settings.settle_window_s if window is None else window
        h = self.scenario.sim.dt_s if dt is None else dt
        quiet = 0.0
        t = 0.0
        while t < max_time:
            X = self.rk4_step(X, h, p_L)
            t += h
            if not np.all(np.isfinite(X)):
                raise NumericalError(f"Non-finite state while settling at t = {t:.6g} s")
            if np.max(np.abs(self.rhs(X, p_L)), initial=0.0) < tol:
                quiet += h
                if quiet >= window:
                    return X, True, t
            else:
                quiet = 0.0
        return X, False, t


def solve_load_frequency(scenario: Scenario, X: np.ndarray, p_L: Optional[np.ndarray] = None) -> np.ndarray:
    """Load-bus frequencies consistent with state ``X`` (p^L defaults to the initial load)."""
    engine = SimulationEngine(scenario)
    p_L = scenario.load_at(0.0) if p_L is None else np.asarray(p_L, dtype=float)
    flows = line_flows(X[engine.layout.eta], scenario.network)
    return engine.solve_load_frequency(X, p_L, engine.E @ flows)


def assemble_rhs(scenario: Scenario, X: np.ndarray, t: float) -> np.ndarray:
    """Full state derivative at time ``t`` with the disturbances active at ``t``."""
    return SimulationEngine(scenario).evaluate(np.asarray(X, dtype=float), scenario.load_at(t), t).derivative


def integrate(
    scenario: Scenario,
    X0: Optional[np.ndarray] = None,
    equilibrium: Optional[SimulationState] = None,
) -> Trajectory:
    """
    Simulate ``scenario`` from its initial state (or ``X0``).

    Passing the closed-loop ``equilibrium`` (from ``find_equilibrium``) also
    fills ``trajectory.lyapunov`` at the stored samples.
    """
    return SimulationEngine(scenario).integrate(X0, equilibrium=equilibrium)
