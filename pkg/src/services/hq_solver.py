"""Half-quadratic block coordinate descent.

Each outer iteration k takes the closed-form sigma step sigma_k =
sigma_update(x_{k-1}) and then solves the x subproblem

    (A^T A + beta sum_i sigma_i G_i^T G_i + mu I) x = A^T b + mu x_{k-1}

with matrix-free conjugate gradients warm-started at x_{k-1}. Both half
steps minimize L over their block, so L never increases.
"""
import logging
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator as ScipyLinearOperator

from src.cli.schemas import InitMode, SolverConfig, SolverTrace, TraceRecord
from src.models.problem import ImplicitConcaveInstance, SigmaVector
from src.services import icf
from src.utils.errors import ConfigError, NotConverged, NumericalError

logger = logging.getLogger(__name__)

# recompute the residual from scratch this often to limit drift
CG_RESIDUAL_REFRESH = 50
NEGATIVE_CURVATURE_TOL = 1e-12


IterationCallback = Callable[[int, np.ndarray, SigmaVector], None]


class SolveResult(NamedTuple):
    x: np.ndarray
    sigma: SigmaVector
    trace: SolverTrace


def cg(
    matvec: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    x0: np.ndarray,
    tol: float,
    max_iters: int,
) -> Tuple[np.ndarray, int, float]:
    """Conjugate gradients for a symmetric positive semidefinite system.

    Returns (x, iterations, relative residual). Stops when
    ||rhs - matvec(x)|| <= tol * ||rhs|| or after max_iters iterations.
    """
    rhs = np.asarray(rhs, dtype=float)
    x = np.array(x0, dtype=float)
    scale = float(np.linalg.norm(rhs))
    if scale == 0.0:
        return np.zeros_like(rhs), 0, 0.0

    r = rhs - matvec(x)
    rr = float(r @ r)
    if np.sqrt(rr) <= tol * scale:
        return x, 0, np.sqrt(rr) / scale
    p = r.copy()

    iters = 0
    while iters < max_iters:
        iters += 1
        ap = matvec(p)
        pap = float(p @ ap)
        pp = float(p @ p)
        if pap < -NEGATIVE_CURVATURE_TOL * pp:
            raise NumericalError(f"cg: negative curvature {pap:.3e} at iteration {iters}")
        if pap <= 0.0:
            # p lies in the null space; nothing more to gain along it
            logger.debug(f"cg: zero curvature at iteration {iters}, stopping")
            break
        alpha = rr / pap
        x += alpha * p
        if iters % CG_RESIDUAL_REFRESH == 0:
            r = rhs - matvec(x)
        else:
            r -= alpha * ap
        rr_new = float(r @ r)
        if not np.isfinite(rr_new):
            raise NumericalError(f"cg: non-finite residual at iteration {iters}")
        if np.sqrt(rr_new) <= tol * scale:
            rr = rr_new
            break
        p = r + (rr_new / rr) * p
        rr = rr_new

    # true residual, not the recursively updated one
    residual = float(np.linalg.norm(rhs - matvec(x))) / scale
    return x, iters, residual


class HalfQuadraticSolver:
    def __init__(self, cfg: Optional[SolverConfig] = None):
        self.cfg = cfg or SolverConfig()

    def sigma_step(self, inst: ImplicitConcaveInstance, x) -> SigmaVector:
        return icf.sigma_update(inst, x)

    def normal_operator(self, inst: ImplicitConcaveInstance, sigma: SigmaVector) -> ScipyLinearOperator:
        A = inst.problem.A
        regs = inst.problem.regularizers
        weights = sigma.check_length(inst.m).values
        beta, mu = inst.beta, self.cfg.tikhonov_mu

        def matvec(v):
            v = np.asarray(v, dtype=float).reshape(-1)
            out = A.apply_adjoint(A.apply(v)) + beta * regs.weighted_gram(weights, v)
            if mu > 0:
                out = out + mu * v
            return out

        return ScipyLinearOperator(shape=(inst.n, inst.n), matvec=matvec, rmatvec=matvec, dtype=float)

    def x_step(self, inst: ImplicitConcaveInstance, sigma: SigmaVector, x_warm) -> Tuple[np.ndarray, int]:
        x_warm = inst.check_x(x_warm)
        if np.any(sigma.values < 0):
            raise NumericalError("x-step needs sigma >= 0")
        normal = self.normal_operator(inst, sigma)
        rhs = inst.adjoint_b
        if self.cfg.tikhonov_mu > 0:
            rhs = rhs + self.cfg.tikhonov_mu * x_warm

        budget = self.cfg.cg_budget(inst.n)
        x, iters, residual = cg(normal.matvec, rhs, x_warm, self.cfg.cg_tol, budget)
        if residual > self.cfg.cg_tol:
            raise NotConverged(
                f"cg stopped at relative residual {residual:.3e} after {iters} iterations "
                f"(tol {self.cfg.cg_tol:.1e})",
                x=x,
                sigma=sigma,
            )
        return x, iters

    def initial_point(self, inst: ImplicitConcaveInstance, x0=None) -> np.ndarray:
        mode = self.cfg.init_mode
        if x0 is not None and mode is None:
            mode = InitMode.GIVEN
        if mode is None:
            mode = InitMode.FROM_OBSERVATION if inst.problem.A.is_identity else InitMode.FROM_ADJOINT

        if mode == InitMode.GIVEN:
            if x0 is None:
                raise ConfigError("init_mode 'given' needs an explicit x0")
            return np.array(inst.check_x(x0), dtype=float)
        if mode == InitMode.FROM_OBSERVATION:
            if inst.r != inst.n:
                raise ConfigError(f"init_mode 'from_observation' needs r == n, got r={inst.r}, n={inst.n}")
            return np.array(inst.problem.b, dtype=float)
        if mode == InitMode.FROM_ADJOINT:
            return np.array(inst.adjoint_b, dtype=float)
        return np.zeros(inst.n)

    def _record(self, inst, iteration, x, sigma, dx, cg_iters, mid=None) -> TraceRecord:
        f = icf.f_value(inst, x)
        augmented = icf.augmented_value(inst, x, sigma)
        grad = icf.f_grad(inst, x)
        grad_inf = float(np.max(np.abs(grad)))
        values = [f, augmented, grad_inf, dx] + ([mid] if mid is not None else [])
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite iterate at outer iteration {iteration}")
        return TraceRecord(
            iteration=iteration,
            f=f,
            augmented=augmented,
            grad_inf=grad_inf,
            dx=dx,
            cg_iters=cg_iters,
            augmented_after_sigma_step=mid,
        )

    def solve(
        self,
        inst: ImplicitConcaveInstance,
        x0=None,
        callback: Optional[IterationCallback] = None,
    ) -> SolveResult:
        """Run block descent from the configured start.

        ``callback(k, x_k, sigma_k)`` sees every iterate pair, including k = 0.
        """
        cfg = self.cfg
        x = self.initial_point(inst, x0)
        sigma = self.sigma_step(inst, x)
        trace = SolverTrace()
        trace.append(self._record(inst, 0, x, sigma, 0.0, 0))
        if callback is not None:
            callback(0, x, sigma)
        logger.debug(f"hq solve start: {inst!r}, f0={trace.records[0].f:.6e}")

        converged = False
        for k in range(1, cfg.max_outer_iters + 1):
            if k > 1:
                sigma = self.sigma_step(inst, x)
            mid = icf.augmented_value(inst, x, sigma)
            try:
                x_new, cg_iters = self.x_step(inst, sigma, x)
            except NotConverged as e:
                raise NotConverged(str(e), trace=trace, x=x, sigma=sigma) from e

            dx = float(np.linalg.norm(x_new - x))
            previous = trace.records[-1]
            record = self._record(inst, k, x_new, sigma, dx, cg_iters, mid)
            trace.append(record)
            x = x_new
            if callback is not None:
                callback(k, x, sigma)
            logger.debug(
                f"iter {k}: f={record.f:.10e} L={record.augmented:.10e} "
                f"|grad|={record.grad_inf:.3e} dx={dx:.3e} cg={cg_iters}"
            )

            obj_ok = abs(record.augmented - previous.augmented) <= cfg.outer_tol_rel_obj * (1.0 + abs(record.augmented))
            x_ok = dx <= cfg.outer_tol_rel_x * (1.0 + float(np.linalg.norm(x)))
            if obj_ok and x_ok:
                converged = True
                break

        sigma = self.sigma_step(inst, x)
        last = trace.records[-1]
        if not converged:
            logger.warning(
                f"hq solve did not converge in {cfg.max_outer_iters} iterations "
                f"(f={last.f:.6e}, |grad|={last.grad_inf:.3e})"
            )
            raise NotConverged(
                f"outer loop exhausted {cfg.max_outer_iters} iterations",
                trace=trace,
                x=x,
                sigma=sigma,
            )
        logger.info(
            f"hq solve converged after {last.iteration} iterations: "
            f"f={last.f:.6e}, |grad|={last.grad_inf:.3e}"
        )
        return SolveResult(x=x, sigma=sigma, trace=trace)


def solve(
    inst: ImplicitConcaveInstance,
    cfg: Optional[SolverConfig] = None,
    x0=None,
    callback: Optional[IterationCallback] = None,
) -> SolveResult:
    return HalfQuadraticSolver(cfg).solve(inst, x0, callback)
