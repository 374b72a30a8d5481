"""
Base device block class with shared evaluation, equilibrium and linearization logic.
"""

import copy
import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, ClassVar, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import root

from ..exceptions import DimensionError, NumericalError
from .realization import LtiRealization

logger = logging.getLogger(__name__)


class Role(str, Enum):
    """Where a block's output enters the bus balance."""

    SUPPLY = "supply_pM"
    DEMAND = "demand_dc"
    DAMPING = "damping_du"


def rows(*values: Any) -> np.ndarray:
    """Stack per-state derivative rows into an (n,) or (n, k) array."""
    return np.stack([np.asarray(v, dtype=float) for v in values])


def no_states(zeta: Sequence[Any]) -> np.ndarray:
    """Empty derivative matching the batch shape of ``zeta``."""
    return np.zeros((0,) + np.shape(zeta[0]))


class DeviceBlock(ABC):
    """
    Base class for generation, controllable-demand and damping blocks.

    A block is a state-space system driven by zeta = [-omega, p_c]. Damping
    blocks ignore the power command channel. Parameters are plain attributes so
    that blocks of the same class can be stacked into a vectorized bank whose
    attributes are arrays (see ``stack``).
    """

    role: Role
    n_states: ClassVar[int] = 0
    _stack_fields: ClassVar[Tuple[str, ...]] = ()

    @abstractmethod
    def derivative(self, x: np.ndarray, zeta: Sequence[Any]) -> np.ndarray:
        """
        State derivative f(x, zeta).

        Args:
            x: State of shape (n,) or (n, k) for a stacked bank
            zeta: Input pair (-omega, p_c); entries are scalars or (k,) arrays

        Returns:
            Array with the same shape as ``x``
        """
        pass

    @abstractmethod
    def output(self, x: np.ndarray, zeta: Sequence[Any]) -> Any:
        """
        Block output g(x, zeta) in p.u. (p^M, d^c or d^u depending on role).
        """
        pass

    @property
    def linear(self) -> bool:
        """True when ``exact_realization`` describes the block globally."""
        return False

    def exact_realization(self) -> Optional[LtiRealization]:
        """Analytic (A, B, C, D) for linear blocks, None otherwise."""
        return None

    def implied_cost(self):
        """Cost function whose clipped marginal inverse is this block's static map."""
        return None

    def storage_matrix(self) -> Optional[np.ndarray]:
        """
        Analytic storage P with V = x~' P x~ satisfying the phi = 0 supply rate
        of the block's own share, or None when it has to be synthesized.
        """
        if self.n_states == 0:
            return np.zeros((0, 0))
        return None

    def initial_guess(self, zeta: Sequence[float]) -> np.ndarray:
        """Starting point for the equilibrium solve."""
        return np.zeros(self.n_states)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(role={self.role.value}, n_states={self.n_states})"

    # -- evaluation -----------------------------------------------------

    def evaluate(self, x: Any, zeta: Any) -> Tuple[np.ndarray, float]:
        """
        Evaluate derivative and output at a single operating point.

        Args:
            x: State vector of length ``n_states``
            zeta: Input vector [-omega, p_c]

        Returns:
            Tuple (dx, y)

        Raises:
            DimensionError: When x or zeta have the wrong length
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        zeta = np.asarray(zeta, dtype=float).reshape(-1)
        if x.shape[0] != self.n_states:
            raise DimensionError(
                f"{self!r} expects a state of length {self.n_states}",
                [f"got length {x.shape[0]}"],
            )
        if zeta.shape[0] != 2:
            raise DimensionError(
                f"{self!r} expects zeta = [-omega, p_c]",
                [f"got length {zeta.shape[0]}"],
            )
        return np.asarray(self.derivative(x, zeta), dtype=float), float(self.output(x, zeta))

    def equilibrium(self, zeta: Any, tol: float = 1e-10) -> Tuple[np.ndarray, float]:
        """
        Solve f(x, zeta) = 0 for a constant input.

        Args:
            zeta: Constant input [-omega, p_c]
            tol: Residual tolerance on the derivative

        Returns:
            Tuple (x_bar, y_bar)

        Raises:
            NumericalError: When the Newton-type solve does not converge
        """
        zeta = np.asarray(zeta, dtype=float).reshape(-1)
        if self.n_states == 0:
            empty = np.zeros(0)
            return empty, float(self.output(empty, zeta))

        solution = root(
            lambda x: self.derivative(x, zeta),
            self.initial_guess(zeta),
            method="hybr",
            tol=tol * 1e-3,
        )
        x_bar = np.asarray(solution.x, dtype=float)
        residual = float(np.max(np.abs(self.derivative(x_bar, zeta))))
        if not np.isfinite(residual) or residual > tol:
            raise NumericalError(
                f"Equilibrium solve for {self!r} did not converge: {solution.message}",
                residual=residual,
            )
        logger.debug("Equilibrium of %r at zeta=%s after %s evaluations", self, zeta, solution.nfev)
        return x_bar, float(self.output(x_bar, zeta))

    def linearize(self, x_bar: Any, zeta_bar: Any, step: Optional[float] = None) -> LtiRealization:
        """
        Jacobian realization about an operating point.

        Linear blocks return their exact matrices. Everything else uses central
        differences on f and g.

        Args:
            x_bar: Operating state (normally from ``equilibrium``)
            zeta_bar: Operating input
            step: Finite-difference step; defaults to the configured fd_step

        Returns:
            Single-output LtiRealization with input ordering [-omega, p_c]

        Raises:
            NumericalError: When a Jacobian entry is not finite
        """
        exact = self.exact_realization() if self.linear else None
        if exact is not None:
            return exact

        if step is None:
            from ..config import get_settings
            step = get_settings().fd_step

        x_bar = np.asarray(x_bar, dtype=float).reshape(-1)
        zeta_bar = np.asarray(zeta_bar, dtype=float).reshape(-1)
        n = self.n_states

        A = np.zeros((n, n))
        C = np.zeros((1, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            A[:, i] = (self.derivative(x_bar + e, zeta_bar) - self.derivative(x_bar - e, zeta_bar)) / (2 * step)
            C[0, i] = (self.output(x_bar + e, zeta_bar) - self.output(x_bar - e, zeta_bar)) / (2 * step)

        B = np.zeros((n, 2))
        D = np.zeros((1, 2))
        for i in range(2):
            e = np.zeros(2)
            e[i] = step
            B[:, i] = (self.derivative(x_bar, zeta_bar + e) - self.derivative(x_bar, zeta_bar - e)) / (2 * step)
            D[0, i] = (self.output(x_bar, zeta_bar + e) - self.output(x_bar, zeta_bar - e)) / (2 * step)

        for name, matrix in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(matrix)):
                raise NumericalError(f"Non-finite entries in linearized {name} of {self!r}")
        return LtiRealization(A=A, B=B, C=C, D=D)

    def omega_feedthrough(self, step: float = 1e-6) -> float:
        """
        Instantaneous gain d(output)/d(omega) at the zero-input equilibrium.

        This is the slope that makes the algebraic load-bus balance solvable.
        """
        x0, _ = self.equilibrium(np.zeros(2))
        up = self.output(x0, np.array([-step, 0.0]))
        down = self.output(x0, np.array([step, 0.0]))
        return float((up - down) / (2 * step))

    # -- stacking -------------------------------------------------------

    @classmethod
    def can_stack(cls, blocks: List["DeviceBlock"]) -> bool:
        """True when ``blocks`` can share one vectorized evaluation."""
        if not cls._stack_fields:
            return False
        if any(type(b) is not cls for b in blocks):
            return False
        for name in cls._stack_fields:
            values = [getattr(b, name) for b in blocks]
            stacker = getattr(type(values[0]), "stack", None)
            if stacker is not None and not type(values[0]).can_stack(values):
                return False
        return True

    @classmethod
    def stack(cls, blocks: List["DeviceBlock"]) -> "DeviceBlock":
        """
        Build one block whose parameters are arrays over ``blocks``.

        Raises:
            ValueError: When the blocks cannot share an evaluation
        """
        if not cls.can_stack(blocks):
            raise ValueError(f"Cannot stack blocks into {cls.__name__}")
        stacked = copy.copy(blocks[0])
        for name in cls._stack_fields:
            values = [getattr(b, name) for b in blocks]
            stacker = getattr(type(values[0]), "stack", None)
            if stacker is not None:
                setattr(stacked, name, stacker(values))
            else:
                setattr(stacked, name, np.array(values, dtype=float))
        return stacked


def device_eval(block: DeviceBlock, x: Any, zeta: Any) -> Tuple[np.ndarray, float]:
    """Evaluate (dx, y) for ``block`` at (x, zeta)."""
    return block.evaluate(x, zeta)


def device_equilibrium(block: DeviceBlock, zeta: Any, tol: float = 1e-10) -> Tuple[np.ndarray, float]:
    """Equilibrium state and static output of ``block`` under constant ``zeta``."""
    return block.equilibrium(zeta, tol=tol)


def linearize(block: DeviceBlock, at: Tuple[Any, Any], step: Optional[float] = None) -> LtiRealization:
    """Linear realization of ``block`` about ``at = (x_bar, zeta_bar)``."""
    x_bar, zeta_bar = at
    return block.linearize(x_bar, zeta_bar, step=step)
