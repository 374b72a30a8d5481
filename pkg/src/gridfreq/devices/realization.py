"""
Linear time-invariant realizations of device and bus dynamics.
"""

import logging
from typing import Any, List, Optional, Sequence, Tuple

import control
import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.linalg import block_diag

logger = logging.getLogger(__name__)


class LtiRealization(BaseModel):
    """
    State-space quadruple (A, B, C, D).

    Block-level realizations have one output; bus-level realizations have
    outputs [s~, -d~u]. Inputs are always ordered [-omega~, p_c~].
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    minimal: Optional[bool] = None
    notes: Tuple[str, ...] = ()

    @field_validator("A", "B", "C", "D", mode="before")
    @classmethod
    def _as_float_matrix(cls, value: Any) -> np.ndarray:
        matrix = np.array(value, dtype=float)
        if matrix.ndim != 2:
            raise ValueError(f"expected a 2-D matrix, got shape {matrix.shape}")
        return matrix

    @model_validator(mode="after")
    def _check_dimensions(self) -> "LtiRealization":
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise ValueError("B rows and C columns must match the state dimension")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError(f"D must be {self.C.shape[0]}x{self.B.shape[1]}, got {self.D.shape}")
        return self

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def transfer(self, s: complex) -> np.ndarray:
        """Evaluate G(s) = C (sI - A)^-1 B + D."""
        if self.n_states == 0:
            return self.D.astype(complex)
        resolvent = np.linalg.solve(s * np.eye(self.n_states) - self.A, self.B)
        return self.C @ resolvent + self.D

    def frequency_response(self, omegas: Sequence[float]) -> np.ndarray:
        """G(j w) for every w, shape (len(omegas), outputs, inputs)."""
        return np.stack([self.transfer(1j * w) for w in omegas])

    def is_hurwitz(self) -> bool:
        if self.n_states == 0:
            return True
        return bool(np.all(np.linalg.eigvals(self.A).real < 0))

    def check_minimal(self, tol: float = 1e-9) -> bool:
        """Controllability and observability rank test."""
        n = self.n_states
        if n == 0:
            return True
        ctrb = control.ctrb(self.A, self.B)
        obsv = control.obsv(self.A, self.C)
        scale = max(1.0, float(np.max(np.abs(self.A))))
        return (
            np.linalg.matrix_rank(ctrb, tol=tol * scale) == n
            and np.linalg.matrix_rank(obsv, tol=tol * scale) == n
        )

    def select_output(self, index: int) -> "LtiRealization":
        return LtiRealization(
            A=self.A, B=self.B, C=self.C[index:index + 1], D=self.D[index:index + 1], minimal=None
        )

    def select_input(self, index: int) -> "LtiRealization":
        return LtiRealization(
            A=self.A, B=self.B[:, index:index + 1], C=self.C, D=self.D[:, index:index + 1], minimal=None
        )


def assemble_bus_realization(parts: List[Tuple[str, LtiRealization]]) -> LtiRealization:
    """
    Combine block realizations into the bus map zeta~ -> [s~, -d~u].

    Args:
        parts: (role value, single-output realization) pairs; role values are
            "supply_pM", "demand_dc" or "damping_du"

    Returns:
        Two-output realization with block-diagonal A
    """
    sign = {"supply_pM": (1.0, 0), "demand_dc": (-1.0, 0), "damping_du": (-1.0, 1)}
    A_blocks, B_rows, C_blocks = [], [], []
    D = np.zeros((2, 2))
    for role, real in parts:
        factor, row = sign[role]
        A_blocks.append(real.A)
        B_rows.append(real.B)
        C_part = np.zeros((2, real.n_states))
        C_part[row] = factor * real.C[0]
        C_blocks.append(C_part)
        D[row] += factor * real.D[0]

    n = sum(a.shape[0] for a in A_blocks)
    A = block_diag(*A_blocks) if n else np.zeros((0, 0))
    B = np.vstack(B_rows) if n else np.zeros((0, 2))
    C = np.hstack(C_blocks) if n else np.zeros((2, 0))
    return LtiRealization(A=A.reshape(n, n), B=B.reshape(n, 2), C=C.reshape(2, n), D=D)


# -- turbine-governor models --------------------------------------------

def second_order_turbine_realization(params) -> LtiRealization:
    """
    Bus map of the two-state turbine-governor with damping.

    s = z + lambda_pc * p_c + theta * lambda * (-omega) driven by K (p_c - omega)
    through two lags; -d^u = (1 - theta) * lambda * (-omega).
    """
    K, ta, tb = params.K, params.tau_a, params.tau_b
    share = params.supply_damping_share
    A = np.array([[-1.0 / ta, 0.0], [1.0 / tb, -1.0 / tb]])
    B = np.array([[K / ta, K / ta], [0.0, 0.0]])
    C = np.array([[0.0, 1.0], [0.0, 0.0]])
    D = np.array([[share * params.damping, params.lambda_pc], [(1.0 - share) * params.damping, 0.0]])
    return LtiRealization(A=A, B=B, C=C, D=D, minimal=True)


def _cancel_factors(
    zeros: List[float], poles: List[float], tol: float
) -> Tuple[List[float], List[float], List[float]]:
    """Remove lead factors (1 + sT) that coincide with lag factors."""
    zeros, poles = list(zeros), list(poles)
    cancelled = []
    for tz in list(zeros):
        for tp in poles:
            if abs(tz - tp) <= tol * max(abs(tz), abs(tp), 1.0):
                zeros.remove(tz)
                poles.remove(tp)
                cancelled.append(tp)
                break
    return zeros, poles, cancelled


def governor_transfer_function(params, tol: float = 1e-9) -> Tuple[control.TransferFunction, List[float]]:
    """
    G(s) = K / (1 + s Ts) * (1 + s T3) / (1 + s Tc) * (1 + s T4) / (1 + s T5).

    Returns:
        The transfer function after exact cancellation of coincident factors,
        and the list of cancelled time constants
    """
    zeros, poles, cancelled = _cancel_factors(
        [params.T_3, params.T_4], [params.T_s, params.T_c, params.T_5], tol
    )
    num = np.array([params.K])
    den = np.array([1.0])
    for t in zeros:
        num = np.polymul(num, [t, 1.0])
    for t in poles:
        den = np.polymul(den, [t, 1.0])
    return control.tf(num, den), cancelled


def tf_to_state_space(params, tol: float = 1e-9) -> LtiRealization:
    """
    Minimal realization of the five-parameter turbine-governor with bus coupling.

    Outputs are [s~, -d~u] with s - d^u = (G + lambda)(-omega) + (G + lambda_pc) p_c.

    Args:
        params: FifthOrderTurbineParams
        tol: Relative tolerance for pole/zero cancellation

    Returns:
        Two-output LtiRealization; ``notes`` records any cancellation
    """
    G, cancelled = governor_transfer_function(params, tol)
    notes: Tuple[str, ...] = ()
    if cancelled:
        notes = tuple(f"pole-zero cancellation at s = {-1.0 / t:.6g}" for t in cancelled)
        logger.warning(
            "Turbine-governor factors cancel (%s); realization order reduced to %d",
            ", ".join(notes), 3 - len(cancelled),
        )

    order = len(np.atleast_1d(np.squeeze(G.den[0][0]))) - 1
    if order == 0:
        a = np.zeros((0, 0))
        b = np.zeros((0, 1))
        c = np.zeros((1, 0))
        d = np.array([[float(np.squeeze(G.num[0][0])) / float(np.squeeze(G.den[0][0]))]])
    else:
        ss = control.tf2ss(G)
        a, b, c, d = (np.asarray(m, dtype=float) for m in (ss.A, ss.B, ss.C, ss.D))

    n = a.shape[0]
    share = params.supply_damping_share
    B = np.hstack([b, b])
    C = np.vstack([c, np.zeros((1, n))])
    D = np.array([
        [d[0, 0] + share * params.damping, d[0, 0] + params.lambda_pc],
        [(1.0 - share) * params.damping, 0.0],
    ])
    return LtiRealization(A=a, B=B, C=C, D=D, minimal=True, notes=notes)
