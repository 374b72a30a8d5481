"""
Bundled generation, controllable-demand and damping blocks.

Every block is driven by zeta = [-omega, p_c]. The OSLC price seen by supply
and demand blocks is f(zeta) = p_c - omega = zeta[0] + zeta[1].
"""

import logging
from typing import Any, Callable, Optional, Sequence

import numpy as np

from ..oslc.costs import CostFunction, QuadraticCost
from ..oslc.maps import ControllerMap
from .base import DeviceBlock, Role, no_states, rows
from .realization import LtiRealization, tf_to_state_space

logger = logging.getLogger(__name__)


def price(zeta: Sequence[Any]) -> Any:
    """f(zeta) = p_c - omega."""
    return zeta[0] + zeta[1]


def _unbounded_quadratic(cost: CostFunction) -> bool:
    return isinstance(cost, QuadraticCost) and not cost.bounded


class _MapDriven(DeviceBlock):
    """OSLC block whose static I/O map is a ControllerMap ``k``."""

    _sign: float = 1.0
    _stack_fields = ("k",)
    k: ControllerMap

    @classmethod
    def _checked(cls, k: ControllerMap) -> ControllerMap:
        if k.sign != cls._sign:
            kind = "k_pM" if cls._sign > 0 else "k_dc"
            raise ValueError(f"{cls.__name__} needs a {kind} map, got {k!r}")
        return k

    @property
    def cost(self) -> CostFunction:
        return self.k.cost

    @property
    def linear(self) -> bool:
        return _unbounded_quadratic(self.cost)

    def implied_cost(self) -> CostFunction:
        return self.cost


# -- supply -------------------------------------------------------------

class StaticSupply(_MapDriven):
    """p^M = k_pM(zeta) = clip((C')^-1(p_c - omega)), the static OSLC generator."""

    role = Role.SUPPLY
    n_states = 0

    def __init__(self, cost: CostFunction):
        self.k = ControllerMap(cost, self._sign)

    @classmethod
    def from_map(cls, k: ControllerMap) -> "StaticSupply":
        block = cls(k.cost)
        block.k = cls._checked(k)
        return block

    def derivative(self, x, zeta):
        return no_states(zeta)

    def output(self, x, zeta):
        return self.k(zeta)

    def exact_realization(self) -> Optional[LtiRealization]:
        if not isinstance(self.cost, QuadraticCost):
            return None
        gain = 1.0 / self.cost.coefficient
        return LtiRealization(A=np.zeros((0, 0)), B=np.zeros((0, 2)), C=np.zeros((1, 0)), D=[[gain, gain]])


class FirstOrderSupply(DeviceBlock):
    """dp^M/dt = -mu (C'(p^M) - (p_c - omega)), output clipped to the cost bounds."""

    role = Role.SUPPLY
    n_states = 1
    _stack_fields = ("mu", "cost")

    def __init__(self, mu: float, cost: CostFunction):
        self.mu = mu
        self.cost = cost

    def derivative(self, x, zeta):
        return rows(-self.mu * (self.cost.derivative(x[0]) - price(zeta)))

    def output(self, x, zeta):
        return self.cost.clip(x[0])

    @property
    def linear(self) -> bool:
        return _unbounded_quadratic(self.cost)

    def exact_realization(self) -> Optional[LtiRealization]:
        if not isinstance(self.cost, QuadraticCost):
            return None
        mu, kappa = self.mu, self.cost.coefficient
        return LtiRealization(A=[[-mu * kappa]], B=[[mu, mu]], C=[[1.0]], D=[[0.0, 0.0]])

    def implied_cost(self) -> CostFunction:
        return self.cost

    def storage_matrix(self) -> Optional[np.ndarray]:
        return np.array([[1.0 / (2.0 * self.mu)]])

    def initial_guess(self, zeta):
        return np.array([self.cost.response(price(zeta))], dtype=float)


class SecondOrderTurbine(DeviceBlock):
    """
    Governor and turbine lags driven by K (p_c - omega):

        tau_a dalpha/dt = -alpha + K (p_c - omega)
        tau_b dz/dt     = -z + alpha
        p^M             = z + lambda_pc * p_c - lambda_s * omega

    lambda_s is the share theta * lambda of the turbine's frequency damping
    reported inside the supply; the remaining (1 - theta) * lambda is a
    LinearDamping block on the same bus.
    """

    role = Role.SUPPLY
    n_states = 2
    _stack_fields = ("K", "tau_a", "tau_b", "lambda_pc", "lambda_s")

    def __init__(self, K: float, tau_a: float, tau_b: float, lambda_pc: float, lambda_s: float = 0.0):
        self.K = K
        self.tau_a = tau_a
        self.tau_b = tau_b
        self.lambda_pc = lambda_pc
        self.lambda_s = lambda_s

    @classmethod
    def from_params(cls, params) -> "SecondOrderTurbine":
        return cls(
            params.K, params.tau_a, params.tau_b, params.lambda_pc,
            params.supply_damping_share * params.damping,
        )

    def derivative(self, x, zeta):
        alpha, z = x[0], x[1]
        return rows(
            (-alpha + self.K * price(zeta)) / self.tau_a,
            (alpha - z) / self.tau_b,
        )

    def output(self, x, zeta):
        return x[1] + self.lambda_pc * zeta[1] + self.lambda_s * zeta[0]

    @property
    def linear(self) -> bool:
        return True

    def exact_realization(self) -> LtiRealization:
        K, ta, tb = self.K, self.tau_a, self.tau_b
        return LtiRealization(
            A=[[-1.0 / ta, 0.0], [1.0 / tb, -1.0 / tb]],
            B=[[K / ta, K / ta], [0.0, 0.0]],
            C=[[0.0, 1.0]],
            D=[[self.lambda_s, self.lambda_pc]],
            minimal=True,
        )

    def implied_cost(self) -> CostFunction:
        # at omega = 0 the steady-state output is (K + lambda_pc) p_c
        return QuadraticCost(1.0 / (self.K + self.lambda_pc))

    def initial_guess(self, zeta):
        target = self.K * price(zeta)
        return np.array([target, target], dtype=float)


class FifthOrderTurbine(DeviceBlock):
    """
    Turbine-governor G(s) = K/(1+sTs) (1+sT3)/(1+sTc) (1+sT4)/(1+sT5) acting on
    p_c - omega, plus the static lambda_pc * p_c path and the supply share of
    the damping. Coincident lead/lag factors are cancelled, so the state
    dimension is between 0 and 3.
    """

    role = Role.SUPPLY

    def __init__(self, params):
        self.params = params
        realization = tf_to_state_space(params)
        self._a = realization.A
        self._b = realization.B[:, 0]
        self._c = realization.C[0]
        self.lambda_pc = params.lambda_pc
        self.lambda_s = params.supply_damping_share * params.damping
        self._d = float(realization.D[0, 1]) - self.lambda_pc
        self.n_states = realization.n_states
        self.notes = realization.notes

    def derivative(self, x, zeta):
        return self._a @ x + np.multiply.outer(self._b, price(zeta))

    def output(self, x, zeta):
        return self._c @ x + self._d * price(zeta) + self.lambda_pc * zeta[1] + self.lambda_s * zeta[0]

    @property
    def linear(self) -> bool:
        return True

    def exact_realization(self) -> LtiRealization:
        b = self._b.reshape(-1, 1)
        return LtiRealization(
            A=self._a,
            B=np.hstack([b, b]),
            C=self._c.reshape(1, -1),
            D=[[self._d + self.lambda_s, self._d + self.lambda_pc]],
            minimal=True,
            notes=self.notes,
        )

    def implied_cost(self) -> CostFunction:
        return QuadraticCost(1.0 / (self.params.K + self.lambda_pc))

    def initial_guess(self, zeta):
        if self.n_states == 0:
            return np.zeros(0)
        return np.linalg.solve(self._a, -self._b * price(zeta))


# -- controllable demand ------------------------------------------------

class StaticDemand(_MapDriven):
    """d^c = k_dc(zeta) = clip((C_d')^-1(omega - p_c)), the static OSLC load."""

    role = Role.DEMAND
    n_states = 0
    _sign = -1.0

    def __init__(self, cost: CostFunction):
        self.k = ControllerMap(cost, self._sign)

    @classmethod
    def from_map(cls, k: ControllerMap) -> "StaticDemand":
        block = cls(k.cost)
        block.k = cls._checked(k)
        return block

    def derivative(self, x, zeta):
        return no_states(zeta)

    def output(self, x, zeta):
        return self.k(zeta)

    def exact_realization(self) -> Optional[LtiRealization]:
        if not isinstance(self.cost, QuadraticCost):
            return None
        gain = -1.0 / self.cost.coefficient
        return LtiRealization(A=np.zeros((0, 0)), B=np.zeros((0, 2)), C=np.zeros((1, 0)), D=[[gain, gain]])


class DynamicDemand(_MapDriven):
    """tau dd^c/dt = -d^c + k_dc(zeta), the dynamic OSLC load."""

    role = Role.DEMAND
    n_states = 1
    _sign = -1.0
    _stack_fields = ("tau", "k")

    def __init__(self, tau: float, cost: CostFunction):
        self.tau = tau
        self.k = ControllerMap(cost, self._sign)

    @classmethod
    def from_map(cls, k: ControllerMap, tau: float) -> "DynamicDemand":
        block = cls(tau, k.cost)
        block.k = cls._checked(k)
        return block

    def derivative(self, x, zeta):
        return rows((-x[0] + self.k(zeta)) / self.tau)

    def output(self, x, zeta):
        return x[0]

    def exact_realization(self) -> Optional[LtiRealization]:
        if not isinstance(self.cost, QuadraticCost):
            return None
        gain = -1.0 / (self.tau * self.cost.coefficient)
        return LtiRealization(A=[[-1.0 / self.tau]], B=[[gain, gain]], C=[[1.0]], D=[[0.0, 0.0]])

    def storage_matrix(self) -> Optional[np.ndarray]:
        if not isinstance(self.cost, QuadraticCost):
            return None
        return np.array([[self.tau * self.cost.coefficient / 2.0]])

    def initial_guess(self, zeta):
        return np.array([self.k(zeta)], dtype=float)


# -- uncontrollable damping ---------------------------------------------

class LinearDamping(DeviceBlock):
    """d^u = lambda * omega."""

    role = Role.DAMPING
    n_states = 0
    _stack_fields = ("lam",)

    def __init__(self, lam: float):
        self.lam = lam

    def derivative(self, x, zeta):
        return no_states(zeta)

    def output(self, x, zeta):
        return -self.lam * zeta[0]

    @property
    def linear(self) -> bool:
        return True

    def exact_realization(self) -> LtiRealization:
        return LtiRealization(A=np.zeros((0, 0)), B=np.zeros((0, 2)), C=np.zeros((1, 0)), D=[[-self.lam, 0.0]])


class LagDamping(DeviceBlock):
    """tau dd^u/dt = -d^u + lambda * omega. No instantaneous frequency response."""

    role = Role.DAMPING
    n_states = 1
    _stack_fields = ("lam", "tau")

    def __init__(self, lam: float, tau: float):
        self.lam = lam
        self.tau = tau

    def derivative(self, x, zeta):
        return rows((-x[0] - self.lam * zeta[0]) / self.tau)

    def output(self, x, zeta):
        return x[0]

    @property
    def linear(self) -> bool:
        return True

    def exact_realization(self) -> LtiRealization:
        return LtiRealization(
            A=[[-1.0 / self.tau]], B=[[-self.lam / self.tau, 0.0]], C=[[1.0]], D=[[0.0, 0.0]]
        )

    def storage_matrix(self) -> np.ndarray:
        return np.array([[self.tau / (2.0 * self.lam)]])

    def initial_guess(self, zeta):
        return np.array([-self.lam * zeta[0]], dtype=float)


class CubicDamping(DeviceBlock):
    """d^u = lambda * omega + cubic * omega^3."""

    role = Role.DAMPING
    n_states = 0
    _stack_fields = ("lam", "cubic")

    def __init__(self, lam: float, cubic: float):
        self.lam = lam
        self.cubic = cubic

    def derivative(self, x, zeta):
        return no_states(zeta)

    def output(self, x, zeta):
        omega = -zeta[0]
        return self.lam * omega + self.cubic * omega ** 3


# -- wrappers -----------------------------------------------------------

class PrefilteredBlock(DeviceBlock):
    """
    Lead/lag compensator (1 + s t_lead)/(1 + s t_lag) on the p_c channel of a
    supply or demand block. The filter has unity DC gain, so the wrapped block's
    steady-state map is unchanged.
    """

    def __init__(self, inner: DeviceBlock, t_lead: float, t_lag: float):
        if inner.role is Role.DAMPING:
            raise ValueError("Damping blocks do not take the power command")
        self.inner = inner
        self.t_lead = t_lead
        self.t_lag = t_lag
        self.role = inner.role
        self.n_states = 1 + inner.n_states

    def _filtered(self, v, zeta):
        ratio = self.t_lead / self.t_lag
        return (zeta[0], v + ratio * (zeta[1] - v))

    def derivative(self, x, zeta):
        v = x[0]
        dv = np.asarray((zeta[1] - v) / self.t_lag, dtype=float)
        inner_dx = np.asarray(self.inner.derivative(x[1:], self._filtered(v, zeta)), dtype=float)
        return np.concatenate([dv[np.newaxis], inner_dx.reshape((self.inner.n_states,) + dv.shape)])

    def output(self, x, zeta):
        return self.inner.output(x[1:], self._filtered(x[0], zeta))

    @property
    def linear(self) -> bool:
        return self.inner.linear

    def exact_realization(self) -> Optional[LtiRealization]:
        inner = self.inner.exact_realization()
        if inner is None:
            return None
        ratio = self.t_lead / self.t_lag
        n = inner.n_states
        b1, b2 = inner.B[:, 0:1], inner.B[:, 1:2]
        d1, d2 = inner.D[0, 0], inner.D[0, 1]
        A = np.zeros((n + 1, n + 1))
        A[0, 0] = -1.0 / self.t_lag
        A[1:, 0:1] = b2 * (1.0 - ratio)
        A[1:, 1:] = inner.A
        B = np.zeros((n + 1, 2))
        B[0, 1] = 1.0 / self.t_lag
        B[1:, 0:1] = b1
        B[1:, 1:2] = b2 * ratio
        C = np.hstack([[[d2 * (1.0 - ratio)]], inner.C])
        return LtiRealization(A=A, B=B, C=C, D=[[d1, d2 * ratio]])

    def implied_cost(self):
        return self.inner.implied_cost()

    def initial_guess(self, zeta):
        return np.concatenate([[zeta[1]], self.inner.initial_guess(zeta)])

    def __repr__(self) -> str:
        return f"PrefilteredBlock({self.inner!r}, t_lead={self.t_lead}, t_lag={self.t_lag})"


class CallableBlock(DeviceBlock):
    """
    User-defined block from derivative/output callables.

    The unique-equilibrium assumption is the caller's responsibility; a failed
    equilibrium solve raises NumericalError.
    """

    def __init__(
        self,
        role: Role,
        n_states: int,
        derivative: Callable[[np.ndarray, Sequence[Any]], Any],
        output: Callable[[np.ndarray, Sequence[Any]], Any],
        storage: Optional[np.ndarray] = None,
        cost: Optional[CostFunction] = None,
    ):
        self.role = Role(role)
        self.n_states = int(n_states)
        self._derivative = derivative
        self._output = output
        self._storage = None if storage is None else np.atleast_2d(np.asarray(storage, dtype=float))
        self._cost = cost

    def derivative(self, x, zeta):
        if self.n_states == 0:
            return no_states(zeta)
        return np.asarray(self._derivative(x, zeta), dtype=float)

    def output(self, x, zeta):
        return self._output(x, zeta)

    def implied_cost(self):
        return self._cost

    def storage_matrix(self) -> Optional[np.ndarray]:
        if self.n_states == 0:
            return np.zeros((0, 0))
        return self._storage
