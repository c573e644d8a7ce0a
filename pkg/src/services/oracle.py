"""Independent numerical ground truth for the analytic code paths.

Nothing here reuses the analytic gradients or conjugates it is meant to
check: derivatives come from finite differences, conjugates from a grid
search over y >= 0, eigenvalues from cyclic Jacobi rotations.
"""
import logging
import math
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from src.cli.schemas import HessianReport
from src.models.potential import Potential
from src.models.problem import ImplicitConcaveInstance, SigmaVector
from src.services import icf
from src.utils.errors import ConfigError, NumericalError, PreconditionError

logger = logging.getLogger(__name__)

ScalarField = Callable[[np.ndarray], float]

GRADIENT_STEP = 1e-5
HESSIAN_STEP = 1e-4
MAX_DENSE_DIM = 64
NONSINGULAR_TOL = 1e-8
PSD_REL_TOL = 1e-6
BOUNDARY_MARGIN = 1e-7
JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


def _finite(value: float, where: str) -> float:
    if not math.isfinite(value):
        raise NumericalError(f"non-finite function value at {where}")
    return value


def default_gradient_step(x) -> float:
    return GRADIENT_STEP * (1.0 + float(np.max(np.abs(x))))


def default_hessian_step(x) -> float:
    return HESSIAN_STEP * (1.0 + float(np.max(np.abs(x))))


def fd_gradient(func: ScalarField, x, h: Optional[float] = None) -> np.ndarray:
    """Central differences, entry i = (f(x + h e_i) - f(x - h e_i)) / 2h."""
    x = np.asarray(x, dtype=float)
    h = default_gradient_step(x) if h is None else h
    if h <= 0:
        raise ConfigError(f"finite-difference step must be positive, got {h!r}")
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        plus = _finite(func(x + step), f"x + h e_{i}")
        minus = _finite(func(x - step), f"x - h e_{i}")
        grad[i] = (plus - minus) / (2.0 * h)
    return grad


def numeric_hessian(func: ScalarField, x, h: Union[None, float, np.ndarray] = None) -> np.ndarray:
    """Second-order central-difference Hessian, symmetrized.

    ``h`` may be a scalar or one step per coordinate.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if h is None:
        h = default_hessian_step(x)
    steps = np.broadcast_to(np.asarray(h, dtype=float), (n,)).copy()
    if np.any(steps <= 0):
        raise ConfigError("finite-difference steps must be positive")

    def at(offsets):
        return _finite(func(x + offsets), "Hessian stencil")

    f0 = at(np.zeros(n))
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        H[i, i] = (at(ei) - 2.0 * f0 + at(-ei)) / steps[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            H[i, j] = (at(ei + ej) - at(ei - ej) - at(-ei + ej) + at(-ei - ej)) / (4.0 * steps[i] * steps[j])
            H[j, i] = H[i, j]
    if not np.all(np.isfinite(H)):
        raise NumericalError("non-finite Hessian entry")
    return 0.5 * (H + H.T)


def jacobi_eigenvalues(M) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-8 * scale:
        raise ConfigError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    n = A.shape[0]

    for sweep in range(JACOBI_MAX_SWEEPS):
        off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
        if off <= JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    # theta**2 would overflow
                    t = 1.0 / (2.0 * theta)
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
                A[p, q] = A[q, p] = 0.0
    else:
        logger.warning(f"jacobi: off-diagonal norm still above tolerance after {JACOBI_MAX_SWEEPS} sweeps")
    return np.sort(np.diag(A))


def min_eigenvalue(M) -> float:
    return float(jacobi_eigenvalues(M)[0])


def conjugate_by_grid(potential: Potential, sigma: float, y_max: float = 50.0, steps: int = 100_000) -> float:
    """inf_{0 <= y <= y_max} (y sigma - V(y)) by grid search plus a bounded refinement."""
    potential.check_sigma(np.asarray(sigma, dtype=float))
    if y_max <= 0:
        raise ConfigError(f"y_max must be positive, got {y_max!r}")
    if steps < 1000:
        raise ConfigError(f"conjugate grid needs at least 1000 steps, got {steps}")

    ys = np.linspace(0.0, y_max, steps + 1)
    values = ys * sigma - potential.v(ys, strict=False)
    best = int(np.argmin(values))
    lo, hi = ys[max(best - 1, 0)], ys[min(best + 1, steps)]

    def objective(y):
        return y * sigma - potential.v(y, strict=False)

    refined = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(min(values[best], refined.fun))


def grid_minimize_1d(
    func: Callable, lo: float, hi: float, step: float, vectorized: bool = False
) -> Tuple[float, float]:
    """Minimize a scalar function on [lo, hi] by exhaustive search, then refine locally.

    With ``vectorized=True`` func is called once on the whole grid.
    """
    if not hi > lo or step <= 0:
        raise ConfigError(f"invalid grid [{lo}, {hi}] with step {step}")
    count = int(round((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, count)
    if vectorized:
        values = np.asarray(func(grid), dtype=float)
    else:
        values = np.array([func(t) for t in grid])
    if not np.all(np.isfinite(values)):
        raise NumericalError("non-finite value on the search grid")
    best = int(np.argmin(values))
    left, right = grid[max(best - 1, 0)], grid[min(best + 1, count - 1)]
    scalar = (lambda t: float(np.asarray(func(np.array([t])))[0])) if vectorized else func
    refined = minimize_scalar(scalar, bounds=(left, right), method="bounded", options={"xatol": 1e-12})
    if refined.fun < values[best]:
        return float(refined.x), float(refined.fun)
    return float(grid[best]), float(values[best])


def _psd_threshold(H: np.ndarray) -> float:
    return PSD_REL_TOL * (1.0 + float(np.max(np.sum(np.abs(H), axis=1))))


def hessian_correspondence_check(
    inst: ImplicitConcaveInstance, x_star, sigma_star, tol: float = 1e-5
) -> HessianReport:
    """Compare the curvature of f at x* with that of L at (x*, sigma*).

    When grad^2 V(Phi(x*)) is nonsingular, f is locally PSD at x* exactly when
    L is, since the Hessian of f is the Schur complement of the sigma block
    of the Hessian of L.
    """
    x_star = inst.check_x(x_star)
    if not isinstance(sigma_star, SigmaVector):
        sigma_star = SigmaVector(sigma_star, inst.potential)
    n, m = inst.n, inst.m
    if n + m > MAX_DENSE_DIM:
        raise PreconditionError(f"dense Hessian check limited to n + m <= {MAX_DENSE_DIM}, got {n + m}")
    stationarity = icf.stationarity_report(inst, x_star, sigma_star, tol)
    if not stationarity.correspondence_ok:
        raise PreconditionError(f"(x*, sigma*) is not stationary at tol {tol:g}: {stationarity}")

    potential = inst.potential
    h = default_hessian_step(x_star)
    H_f = numeric_hessian(lambda z: icf.f_value(inst, z), x_star, h)
    min_eig_f = min_eigenvalue(H_f)
    thr_f = _psd_threshold(H_f)

    curvature = np.atleast_1d(potential.v_hess(icf.phi(inst, x_star), strict=False))
    nonsingular = bool(np.all(np.abs(curvature) >= NONSINGULAR_TOL))

    sigma = sigma_star.values
    dom = potential.sigma_domain
    distance = np.minimum(sigma - dom.lower, dom.upper - sigma)
    if np.min(distance) <= BOUNDARY_MARGIN:
        logger.info("sigma* on the boundary of D; Hessian of L not evaluated")
        min_eig_L = math.nan
        psd_L = pd_L = False
        correspondence = None
    else:
        z = np.concatenate([x_star, sigma])
        steps = np.concatenate([np.full(n, h), np.minimum(h, 0.5 * distance)])
        H_L = numeric_hessian(lambda v: icf.augmented_value(inst, v[:n], v[n:]), z, steps)
        min_eig_L = min_eigenvalue(H_L)
        thr_L = _psd_threshold(H_L)
        psd_L = min_eig_L >= -thr_L
        pd_L = min_eig_L > thr_L
        correspondence = None

    psd_f = min_eig_f >= -thr_f
    pd_f = min_eig_f > thr_f
    if nonsingular and not math.isnan(min_eig_L):
        correspondence = psd_f == psd_L

    report = HessianReport(
        min_eig_f=min_eig_f,
        min_eig_L=min_eig_L,
        psd_f=psd_f,
        psd_L=psd_L,
        pd_f=pd_f,
        pd_L=pd_L,
        vgrad_hessian_nonsingular=nonsingular,
        correspondence_holds=correspondence,
    )
    logger.debug(f"hessian check: {report}")
    return report
