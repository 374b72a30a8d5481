"""
Decentralized dissipativity certificates for bus dynamics.

The bus map zeta~ = [-omega~, p_c~] -> y~ = [s~, -d~u] must satisfy

    V' <= y~' N zeta~ - eps1 omega~^2 - eps2 p_c~^2,   N = [[1, 1], [1, 0]]

for some storage V = x~' P x~. For LTI blocks this is checked in the frequency
domain,

    Pi(w) = G(jw)^H M + M G(jw) + K >= 0,   M = N/2, K = diag(-eps1, -eps2),

and a storage P is synthesized from the equivalent LMI when possible.
"""

import logging
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import block_diag, eigvals, solve_continuous_are
from scipy.optimize import minimize

from ..config import get_settings
from ..devices.base import DeviceBlock
from ..devices.params import FifthOrderTurbineParams, SecondOrderTurbineParams
from ..devices.realization import LtiRealization, assemble_bus_realization, second_order_turbine_realization, tf_to_state_space
from ..exceptions import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

COUPLING = 0.5 * np.array([[1.0, 1.0], [1.0, 0.0]])
SWEEP_DECADES = (-4.0, 4.0)
COARSE_PER_DECADE = 50
REFINED_MINIMA = 3


class SupplyRateMode(str, Enum):
    ASSUMPTION_A = "assumption_a"
    ASSUMPTION_B = "assumption_b"
    NONE = "none"


class SupplyRateSpec(BaseModel):
    """
    Penalty weights of the supply rate.

    ``assumption_a`` needs both weights positive; ``assumption_b`` drops the
    p_c penalty and adds the imaginary-axis zero test; ``none`` places no
    constraint (eps = 0 is plain passivity).
    """

    model_config = ConfigDict(frozen=True)

    eps1: float = Field(default=1e-3, ge=0, description="Weight on omega~^2")
    eps2: float = Field(default=1e-3, ge=0, description="Weight on p_c~^2")
    mode: SupplyRateMode = SupplyRateMode.ASSUMPTION_A

    @model_validator(mode="after")
    def _mode_constraints(self) -> "SupplyRateSpec":
        if self.mode is SupplyRateMode.ASSUMPTION_A and not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("assumption_a needs eps1 > 0 and eps2 > 0")
        if self.mode is SupplyRateMode.ASSUMPTION_B and not (self.eps1 > 0 and self.eps2 == 0):
            raise ValueError("assumption_b needs eps1 > 0 and eps2 = 0")
        return self

    @classmethod
    def default(cls, mode: SupplyRateMode = SupplyRateMode.ASSUMPTION_A) -> "SupplyRateSpec":
        eps = get_settings().epsilon
        if mode is SupplyRateMode.ASSUMPTION_B:
            return cls(eps1=eps, eps2=0.0, mode=mode)
        if mode is SupplyRateMode.NONE:
            return cls(eps1=0.0, eps2=0.0, mode=mode)
        return cls(eps1=eps, eps2=eps, mode=mode)

    @classmethod
    def passivity(cls) -> "SupplyRateSpec":
        return cls(eps1=0.0, eps2=0.0, mode=SupplyRateMode.NONE)

    @property
    def penalty(self) -> np.ndarray:
        return np.diag([-self.eps1, -self.eps2])

    @property
    def quadratic_form(self) -> np.ndarray:
        """Q acting on [y~; zeta~]."""
        return np.block([[np.zeros((2, 2)), COUPLING], [COUPLING, self.penalty]])


class Certificate(BaseModel):
    """Verdict of a dissipativity check. Never raised, always returned."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    feasible: bool
    margin: float
    worst_frequency: Optional[float] = None
    storage: Optional[np.ndarray] = None
    lmi_residual: Optional[float] = None
    method: str = "frequency_sweep"
    mode: Optional[SupplyRateMode] = None
    diagnostics: List[str] = []
    sweep: List[Tuple[float, float]] = []


def supply_rate_eval(y_dev, zeta_dev, spec: SupplyRateSpec) -> float:
    """
    W = y~' N zeta~ - eps1 omega~^2 - eps2 p_c~^2.

    Args:
        y_dev: [s~, -d~u]
        zeta_dev: [-omega~, p_c~]
        spec: Penalty weights
    """
    y = np.asarray(y_dev, dtype=float)
    zeta = np.asarray(zeta_dev, dtype=float)
    return float(y @ (2.0 * COUPLING) @ zeta - spec.eps1 * zeta[0] ** 2 - spec.eps2 * zeta[1] ** 2)


def feedthrough_form(D: np.ndarray, spec: SupplyRateSpec) -> np.ndarray:
    """R = D'M + MD + K, the form Pi takes at infinite frequency."""
    D = np.asarray(D, dtype=float)
    return D.T @ COUPLING + COUPLING @ D + spec.penalty


def _tolerance(tol: Optional[float]) -> float:
    return get_settings().eig_tol if tol is None else tol


def check_memoryless(D, spec: SupplyRateSpec, tol: Optional[float] = None) -> Certificate:
    """Certificate for a block without states: the symmetric form R must be PSD."""
    tol = _tolerance(tol)
    form = feedthrough_form(D, spec)
    margin = float(np.min(np.linalg.eigvalsh(form)))
    feasible = margin >= -tol
    return Certificate(
        feasible=feasible,
        margin=margin,
        storage=np.zeros((0, 0)) if feasible else None,
        lmi_residual=max(0.0, -margin),
        method="memoryless",
        mode=spec.mode,
    )


def _responses(real: LtiRealization, omegas: np.ndarray) -> np.ndarray:
    """G(jw) for every w, shape (len(omegas), 2, 2)."""
    m = len(omegas)
    if real.n_states == 0:
        return np.broadcast_to(real.D.astype(complex), (m,) + real.D.shape)
    n = real.n_states
    pencil = 1j * omegas[:, None, None] * np.eye(n) - real.A
    resolvent = np.linalg.solve(pencil, np.broadcast_to(real.B.astype(complex), (m, n, real.n_inputs)))
    return real.C @ resolvent + real.D


def frequency_margins(real: LtiRealization, omegas: np.ndarray, spec: SupplyRateSpec) -> np.ndarray:
    """Smallest eigenvalue of Pi(w) at every frequency."""
    G = _responses(real, np.asarray(omegas, dtype=float))
    Pi = np.conj(np.swapaxes(G, 1, 2)) @ COUPLING + COUPLING @ G + spec.penalty
    return np.linalg.eigvalsh(Pi)[:, 0]


def kyp_sweep(
    real: LtiRealization,
    spec: SupplyRateSpec,
    points_per_decade: Optional[int] = None,
) -> Tuple[float, float, List[Tuple[float, float]]]:
    """
    Coarse log grid over [1e-4, 1e4] rad/s plus w = 0 and w -> inf, refined
    around the deepest local minima.

    Returns:
        (margin, worst frequency, sorted (w, margin) series)
    """
    density = get_settings().points_per_decade if points_per_decade is None else points_per_decade
    lo, hi = SWEEP_DECADES
    grid = np.logspace(lo, hi, int((hi - lo) * COARSE_PER_DECADE) + 1)
    margins = frequency_margins(real, grid, spec)

    interior = np.flatnonzero(
        (margins[1:-1] <= margins[:-2]) & (margins[1:-1] <= margins[2:])
    ) + 1
    candidates = list(interior[np.argsort(margins[interior])][:REFINED_MINIMA])
    candidates += [0, len(grid) - 1]
    refined_w, refined_m = [grid], [margins]
    for i in candidates:
        a = np.log10(grid[max(i - 1, 0)])
        b = np.log10(grid[min(i + 1, len(grid) - 1)])
        count = max(int(round((b - a) * density)), 3)
        w = np.logspace(a, b, count)
        refined_w.append(w)
        refined_m.append(frequency_margins(real, w, spec))

    omegas = np.concatenate(refined_w + [[0.0]])
    values = np.concatenate(refined_m + [frequency_margins(real, np.array([0.0]), spec)])
    order = np.argsort(omegas, kind="stable")
    series = [(float(w), float(m)) for w, m in zip(omegas[order], values[order])]

    at_infinity = float(np.min(np.linalg.eigvalsh(feedthrough_form(real.D, spec))))
    series.append((float("inf"), at_infinity))

    worst = min(range(len(series)), key=lambda k: series[k][1])
    return series[worst][1], series[worst][0], series


def lmi_matrix(real: LtiRealization, P: np.ndarray, spec: SupplyRateSpec) -> np.ndarray:
    """[[A'P + PA, PB - C'M], [B'P - MC, -R]]; negative semidefinite iff P certifies."""
    A, B, C = real.A, real.B, real.C
    off_diag = P @ B - C.T @ COUPLING
    return np.vstack((
        np.hstack((A.T @ P + P @ A, off_diag)),
        np.hstack((off_diag.T, -feedthrough_form(real.D, spec))),
    ))


def lmi_residual(real: LtiRealization, P: np.ndarray, spec: SupplyRateSpec) -> float:
    """Largest eigenvalue of the LMI matrix (<= 0 when P is a valid storage)."""
    return float(np.max(np.linalg.eigvalsh(lmi_matrix(real, np.asarray(P, dtype=float), spec))))


def _riccati_candidates(real: LtiRealization, spec: SupplyRateSpec) -> List[np.ndarray]:
    R = feedthrough_form(real.D, spec)
    scale = max(1.0, float(np.max(np.abs(R))))
    if np.min(np.linalg.eigvalsh(R)) < 1e-10 * scale:
        R = R + 1e-9 * scale * np.eye(2)
    S = real.C.T @ COUPLING
    Q = np.zeros_like(real.A)
    candidates = []
    for solve in (
        lambda: -solve_continuous_are(real.A, real.B, Q, R, s=S),
        lambda: solve_continuous_are(-real.A, -real.B, Q, R, s=S),
    ):
        try:
            P = solve()
        except (np.linalg.LinAlgError, ValueError) as e:
            logger.debug("Riccati candidate failed: %s", e)
            continue
        if np.all(np.isfinite(P)):
            candidates.append(0.5 * (P + P.T))
    return candidates


def synthesize_storage(
    real: LtiRealization,
    spec: SupplyRateSpec,
    tol: Optional[float] = None,
) -> Tuple[Optional[np.ndarray], Optional[float]]:
    """
    Storage matrix P >= 0 with a negative semidefinite LMI matrix.

    Riccati solutions of the equality version of the LMI come first; when they
    fail, the positive part of the LMI spectrum is minimized over P = L L'.

    Returns:
        (P, residual) or (None, best residual) when nothing certifies
    """
    tol = _tolerance(tol)
    n = real.n_states
    if n == 0:
        residual = lmi_residual(real, np.zeros((0, 0)), spec)
        return (np.zeros((0, 0)), residual) if residual <= tol else (None, residual)

    scale = max(1.0, float(np.max(np.abs(real.A))), float(np.max(np.abs(real.B))), float(np.max(np.abs(real.C))))
    accept = tol * scale
    best: Tuple[Optional[np.ndarray], float] = (None, np.inf)
    for P in _riccati_candidates(real, spec):
        if np.min(np.linalg.eigvalsh(P)) < -accept:
            continue
        residual = lmi_residual(real, P, spec)
        if residual < best[1]:
            best = (P, residual)
    if best[0] is not None and best[1] <= accept:
        return best

    rows, cols = np.tril_indices(n)

    def unpack(theta: np.ndarray) -> np.ndarray:
        L = np.zeros((n, n))
        L[rows, cols] = theta
        return L @ L.T

    def objective(theta: np.ndarray) -> float:
        eig = np.linalg.eigvalsh(lmi_matrix(real, unpack(theta), spec))
        return float(np.sum(np.maximum(eig, 0.0) ** 2))

    start = best[0] if best[0] is not None else np.eye(n)
    try:
        L0 = np.linalg.cholesky(start + 1e-9 * np.eye(n))
    except np.linalg.LinAlgError:
        L0 = np.eye(n)
    result = minimize(objective, L0[rows, cols], method="BFGS", options={"gtol": 1e-14, "maxiter": 2000})
    P = unpack(result.x)
    residual = lmi_residual(real, P, spec)
    logger.debug("Storage minimization: %s, residual %.3e", result.message, residual)
    if residual <= accept:
        return P, residual
    return None, min(residual, best[1])


def check_assumption_b_zeros(real: LtiRealization, tol: float = 1e-8) -> bool:
    """
    True iff the p_c -> s path has no zeros on the imaginary axis.

    Zeros are the finite generalized eigenvalues of the Rosenbrock pencil
    [[A - sI, b], [c, d]].

    Raises:
        NumericalError: When the pencil is singular (the path is identically zero)
    """
    n = real.n_states
    b = real.B[:, 1:2]
    c = real.C[0:1]
    d = real.D[0:1, 1:2]
    system = np.block([[real.A, b], [c, d]])
    mass = block_diag(np.eye(n), np.zeros((1, 1)))
    alpha, beta = eigvals(system, mass, homogeneous_eigvals=True)
    if np.any((np.abs(alpha) < tol) & (np.abs(beta) < tol)):
        raise NumericalError("Degenerate Rosenbrock pencil: the p_c -> s path is identically zero")
    finite = np.abs(beta) > tol * np.maximum(np.abs(alpha), 1.0)
    zeros = alpha[finite] / beta[finite]
    on_axis = np.abs(zeros.real) <= tol * np.maximum(np.abs(zeros), 1.0)
    if np.any(on_axis):
        logger.info("Imaginary-axis zeros on the p_c -> s path: %s", zeros[on_axis])
    return not bool(np.any(on_axis))


def _zero_condition(real: LtiRealization, diagnostics: List[str]) -> bool:
    try:
        if check_assumption_b_zeros(real):
            return True
    except NumericalError:
        # p_c does not reach s, so there is nothing to exclude
        diagnostics.append("p_c -> s path identically zero")
        return True
    diagnostics.append("p_c -> s path has imaginary-axis zeros")
    return False


def check_lti_dissipativity(
    real: LtiRealization,
    spec: SupplyRateSpec,
    tol: Optional[float] = None,
    points_per_decade: Optional[int] = None,
    synthesize: bool = True,
) -> Certificate:
    """
    Frequency-domain dissipativity check with optional storage synthesis.

    Args:
        real: Bus realization (inputs [-omega~, p_c~], outputs [s~, -d~u])
        spec: Supply-rate weights and mode
        tol: Eigenvalue tolerance; defaults to the configured eig_tol
        points_per_decade: Refinement density near minima
        synthesize: Whether to look for a storage matrix when feasible

    Returns:
        Certificate; a failed synthesis keeps the sweep verdict and records
        "frequency_sweep only"

    Raises:
        NumericalError: When A is not Hurwitz
    """
    tol = _tolerance(tol)
    if real.n_states == 0:
        certificate = check_memoryless(real.D, spec, tol)
        if spec.mode is SupplyRateMode.ASSUMPTION_B and certificate.feasible:
            certificate.feasible = _zero_condition(real, certificate.diagnostics)
        return certificate

    if not real.is_hurwitz():
        raise NumericalError(
            "Realization is not Hurwitz; eigenvalues " + ", ".join(f"{z:.4g}" for z in np.linalg.eigvals(real.A))
        )
    diagnostics: List[str] = list(real.notes)
    if real.minimal is not True and not real.check_minimal():
        logger.warning("Realization with %d states is not minimal; the sweep only sees its minimal part",
                       real.n_states)
        diagnostics.append("realization not minimal")

    margin, worst, series = kyp_sweep(real, spec, points_per_decade)
    feasible = margin >= -tol
    if spec.mode is SupplyRateMode.ASSUMPTION_B and feasible:
        feasible = _zero_condition(real, diagnostics)

    certificate = Certificate(
        feasible=feasible, margin=margin, worst_frequency=worst, diagnostics=diagnostics, sweep=series,
        mode=spec.mode,
    )
    if feasible and synthesize:
        P, residual = synthesize_storage(real, spec, tol)
        certificate.lmi_residual = residual
        if P is None:
            logger.warning("Storage synthesis failed (LMI residual %.3e); certificate is frequency-sweep only",
                           residual)
            certificate.method = "frequency_sweep only"
            certificate.diagnostics.append("storage synthesis failed")
        else:
            certificate.storage = P
            certificate.method = "frequency_sweep+storage"
    logger.info("Dissipativity %s: margin %.3e at w = %s rad/s",
                "feasible" if feasible else "infeasible", margin, f"{worst:.4g}")
    return certificate


# -- bus level ----------------------------------------------------------

def _operating_point(block: DeviceBlock, omega: float, pc: float) -> Tuple[np.ndarray, np.ndarray]:
    zeta = np.array([-omega, pc])
    x_bar, _ = block.equilibrium(zeta)
    return x_bar, zeta


def bus_realization(bus, equilibrium: Tuple[float, float] = (0.0, 0.0), step: Optional[float] = None) -> LtiRealization:
    """
    Two-output realization [s~, -d~u] of every block on ``bus``.

    Linear blocks contribute their exact matrices, everything else is
    linearized about the block equilibrium at (omega*, p_c*) = ``equilibrium``.
    State order follows the bus's device order.
    """
    omega, pc = equilibrium
    parts = []
    for block in bus.devices:
        x_bar, zeta = _operating_point(block, omega, pc)
        parts.append((block.role.value, block.linearize(x_bar, zeta, step)))
    return assemble_bus_realization(parts)


def bus_storage(bus, spec: Optional[SupplyRateSpec] = None, equilibrium: Tuple[float, float] = (0.0, 0.0)) -> Tuple[Optional[np.ndarray], str]:
    """
    Storage P_j for the device states of ``bus`` (passivity supply rate by default).

    Analytic block storages are used when every block provides one; otherwise
    P is synthesized for the whole bus realization.

    Returns:
        (P or None, how it was obtained)
    """
    spec = SupplyRateSpec.passivity() if spec is None else spec
    analytic = [block.storage_matrix() for block in bus.devices]
    if all(P is not None for P in analytic):
        n = sum(P.shape[0] for P in analytic)
        return (block_diag(*analytic) if n else np.zeros((0, 0))), "analytic"
    try:
        real = bus_realization(bus, equilibrium)
        if not real.is_hurwitz():
            return None, "bus realization not Hurwitz"
        P, residual = synthesize_storage(real, spec)
    except NumericalError as e:
        return None, f"linearization failed: {e}"
    if P is None:
        return None, f"synthesis failed (LMI residual {residual:.3e})"
    nonlinear = [b for b in bus.devices if not b.linear]
    return P, "synthesized (linearized)" if nonlinear else "synthesized"


def check_bus(bus, spec: SupplyRateSpec, equilibrium: Tuple[float, float] = (0.0, 0.0), **kwargs) -> Certificate:
    """Certificate for one bus; nonlinear blocks are certified on their linearization."""
    real = bus_realization(bus, equilibrium)
    certificate = check_lti_dissipativity(real, spec, **kwargs)
    nonlinear = [repr(b) for b in bus.devices if not b.linear]
    if nonlinear:
        certificate.diagnostics.append("declared, not certified (linearized): " + ", ".join(nonlinear))
    return certificate


def certify_network(
    network,
    spec: SupplyRateSpec,
    fallback: Optional[SupplyRateSpec] = None,
    **kwargs,
) -> Dict[str, Certificate]:
    """
    Certificate per bus id.

    Buses that fail under ``spec`` are checked again under ``fallback`` when
    one is given; each bus may meet either condition.
    """
    certificates = {}
    for bus in network.buses:
        certificate = check_bus(bus, spec, **kwargs)
        if not certificate.feasible and fallback is not None:
            retry = check_bus(bus, fallback, **kwargs)
            if retry.feasible:
                retry.diagnostics.append(f"fails {spec.mode.value} (margin {certificate.margin:.3e})")
                certificate = retry
        certificates[bus.id] = certificate
    return certificates


# -- design ---------------------------------------------------------------

def _bisect(feasible, lo: float, hi: float, tol: float) -> float:
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def minimum_damping(params, spec: SupplyRateSpec, upper: Optional[float] = None, tol: float = 1e-4) -> float:
    """
    Smallest damping coefficient that still certifies a turbine bus.

    Second-order turbines are searched over lambda_pc in (0, lambda] with the
    automatic damping share; fifth-order turbines over lambda up to ``upper``.

    Raises:
        NumericalError: When even the largest value in range does not certify
        ConfigurationError: For other parameter types
    """
    def certified(real: LtiRealization) -> bool:
        return check_lti_dissipativity(real, spec, points_per_decade=200, synthesize=False).feasible

    if isinstance(params, SecondOrderTurbineParams):
        field = "lambda_pc"
        hi = params.damping if upper is None else min(upper, params.damping)

        def feasible(value: float) -> bool:
            return certified(second_order_turbine_realization(params.model_copy(update={"lambda_pc": value})))

    elif isinstance(params, FifthOrderTurbineParams):
        field = "lambda"
        hi = 1e3 if upper is None else upper

        def feasible(value: float) -> bool:
            return certified(tf_to_state_space(params.model_copy(update={"damping": value})))

    else:
        raise ConfigurationError(f"minimum_damping does not support {type(params).__name__}")

    if not feasible(hi):
        raise NumericalError(f"Not certifiable for any {field} <= {hi:g}")
    value = _bisect(feasible, 0.0, hi, tol)
    logger.info("Minimum %s for %s: %.6g", field, type(params).__name__, value)
    return value

