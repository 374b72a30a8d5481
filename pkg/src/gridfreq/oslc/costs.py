"""
Convex cost and disutility functions with saturation bounds.
"""

from abc import ABC, abstractmethod
from typing import Any, Callable, List, Optional

import numpy as np
from scipy.integrate import quad

from ..exceptions import ConfigurationError


class CostFunction(ABC):
    """
    Strictly convex, continuously differentiable cost C(p) on [lower, upper].

    Methods accept scalars or numpy arrays so that stacked device banks can
    evaluate many buses at once.
    """

    def __init__(self, lower: Any = -np.inf, upper: Any = np.inf):
        if np.any(np.asarray(lower) > np.asarray(upper)):
            raise ConfigurationError(f"Cost bounds are inverted: [{lower}, {upper}]")
        self.lower = lower
        self.upper = upper

    @abstractmethod
    def value(self, p: Any) -> Any:
        """C(p)."""
        pass

    @abstractmethod
    def derivative(self, p: Any) -> Any:
        """Marginal cost C'(p)."""
        pass

    @abstractmethod
    def inverse_derivative(self, price: Any) -> Any:
        """(C')^-1(price), unclipped."""
        pass

    @property
    def bounded(self) -> bool:
        return bool(np.any(np.isfinite(self.lower)) or np.any(np.isfinite(self.upper)))

    def clip(self, p: Any) -> Any:
        return np.clip(p, self.lower, self.upper)

    def response(self, price: Any) -> Any:
        """Cost-minimizing allocation at a given price: clip((C')^-1(price))."""
        return self.clip(self.inverse_derivative(price))

    def check_increasing(self, span: float = 10.0, samples: int = 201) -> None:
        """
        Sample C' to confirm it is strictly increasing (strict convexity).

        Raises:
            ConfigurationError: When C' fails to increase somewhere on the grid
        """
        lo = self.lower if np.isfinite(self.lower) else -span
        hi = self.upper if np.isfinite(self.upper) else span
        if hi <= lo:
            return
        grid = np.linspace(lo, hi, samples)
        slopes = np.array([self.derivative(p) for p in grid], dtype=float)
        if not np.all(np.isfinite(slopes)) or np.any(np.diff(slopes) <= 0):
            raise ConfigurationError(f"{self!r}: marginal cost is not strictly increasing")
        prices = np.array([self.inverse_derivative(c) for c in slopes], dtype=float)
        if not np.allclose(prices, grid, rtol=1e-6, atol=1e-8):
            raise ConfigurationError(f"{self!r}: inverse marginal cost does not invert C'")

    @classmethod
    def can_stack(cls, costs: List["CostFunction"]) -> bool:
        return False

    @classmethod
    def stack(cls, costs: List["CostFunction"]) -> "CostFunction":
        raise ValueError(f"{cls.__name__} cannot be vectorized")


class QuadraticCost(CostFunction):
    """C(p) = 1/2 * coefficient * p^2."""

    def __init__(self, coefficient: Any, lower: Any = -np.inf, upper: Any = np.inf):
        if np.any(np.asarray(coefficient) <= 0):
            raise ConfigurationError(f"Quadratic cost coefficient must be positive, got {coefficient}")
        super().__init__(lower, upper)
        self.coefficient = coefficient

    def value(self, p: Any) -> Any:
        return 0.5 * self.coefficient * np.square(p)

    def derivative(self, p: Any) -> Any:
        return self.coefficient * p

    def inverse_derivative(self, price: Any) -> Any:
        return price / self.coefficient

    def scaled(self, factor: float) -> "QuadraticCost":
        return QuadraticCost(self.coefficient * factor, self.lower, self.upper)

    def __repr__(self) -> str:
        return f"QuadraticCost(coefficient={self.coefficient}, bounds=[{self.lower}, {self.upper}])"

    @classmethod
    def can_stack(cls, costs: List[CostFunction]) -> bool:
        return all(type(c) is QuadraticCost for c in costs)

    @classmethod
    def stack(cls, costs: List[CostFunction]) -> "QuadraticCost":
        return QuadraticCost(
            np.array([c.coefficient for c in costs], dtype=float),
            np.array([c.lower for c in costs], dtype=float),
            np.array([c.upper for c in costs], dtype=float),
        )


class UserCost(CostFunction):
    """Cost given by user callables for C' and (C')^-1."""

    def __init__(
        self,
        derivative: Callable[[float], float],
        inverse_derivative: Callable[[float], float],
        value: Optional[Callable[[float], float]] = None,
        lower: float = -np.inf,
        upper: float = np.inf,
    ):
        super().__init__(lower, upper)
        self._derivative = derivative
        self._inverse = inverse_derivative
        self._value = value

    def value(self, p: Any) -> Any:
        if self._value is not None:
            return self._value(p)
        return np.vectorize(lambda q: quad(self._derivative, 0.0, q)[0])(p)

    def derivative(self, p: Any) -> Any:
        return self._derivative(p)

    def inverse_derivative(self, price: Any) -> Any:
        return self._inverse(price)

    def scaled(self, factor: float) -> "UserCost":
        value = None if self._value is None else (lambda p: factor * self._value(p))
        return UserCost(
            lambda p: factor * self._derivative(p),
            lambda c: self._inverse(c / factor),
            value,
            self.lower,
            self.upper,
        )

    def __repr__(self) -> str:
        return f"UserCost(bounds=[{self.lower}, {self.upper}])"


def marginal_cost(cost: CostFunction, value: float) -> float:
    """
    Marginal cost C'(value).

    Args:
        cost: Cost or disutility function
        value: Allocation in p.u.

    Returns:
        C'(value) in marginal-cost units
    """
    return float(cost.derivative(value))
