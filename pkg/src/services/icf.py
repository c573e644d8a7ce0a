"""Evaluation of f(x) = ||Ax - b||^2 + beta sum_i V(||G_i x||^2) and of its
augmented function L(x, sigma) = ||Ax - b||^2 + beta sum_i (sigma_i ||G_i x||^2 - V*(sigma_i)).
"""
import logging
from typing import Tuple

import numpy as np

from src.cli.schemas import StationarityReport
from src.models.problem import ImplicitConcaveInstance, SigmaVector

logger = logging.getLogger(__name__)

DEFAULT_STATIONARITY_TOL = 1e-5


def _residual(inst: ImplicitConcaveInstance, x: np.ndarray) -> np.ndarray:
    return inst.problem.A.apply(x) - inst.problem.b


def _sigma_values(inst: ImplicitConcaveInstance, sigma) -> np.ndarray:
    if not isinstance(sigma, SigmaVector):
        sigma = SigmaVector(sigma, inst.potential)
    return sigma.check_length(inst.m).values


def phi(inst: ImplicitConcaveInstance, x) -> np.ndarray:
    """Phi_i(x) = ||G_i x||^2 for every regularizer, shape (m,)."""
    x = inst.check_x(x)
    gx = inst.problem.regularizers.apply_all(x)
    return np.einsum("ij,ij->i", gx, gx)


def f_value(inst: ImplicitConcaveInstance, x) -> float:
    x = inst.check_x(x)
    res = _residual(inst, x)
    reg = inst.potential.v(phi(inst, x), strict=False)
    return float(res @ res + inst.beta * np.sum(reg))


def augmented_value(inst: ImplicitConcaveInstance, x, sigma) -> float:
    x = inst.check_x(x)
    s = _sigma_values(inst, sigma)
    res = _residual(inst, x)
    coupling = s @ phi(inst, x) - np.sum(inst.potential.v_conj(s))
    return float(res @ res + inst.beta * coupling)


def sigma_update(inst: ImplicitConcaveInstance, x) -> SigmaVector:
    """sigma_i = grad V(Phi_i(x)), the exact minimizer of L(x, .) over D."""
    # weight(||G_i x||) evaluated on Phi directly, so no square root round trip
    weights = inst.potential.v_grad(phi(inst, x), strict=False)
    return SigmaVector(np.atleast_1d(weights), inst.potential)


def _gradient_x(inst: ImplicitConcaveInstance, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    data = 2.0 * inst.problem.A.apply_adjoint(_residual(inst, x))
    reg = 2.0 * inst.beta * inst.problem.regularizers.weighted_gram(s, x)
    return data + reg


def f_grad(inst: ImplicitConcaveInstance, x) -> np.ndarray:
    x = inst.check_x(x)
    return _gradient_x(inst, x, sigma_update(inst, x).values)


def augmented_grad(inst: ImplicitConcaveInstance, x, sigma) -> Tuple[np.ndarray, np.ndarray]:
    """(grad_x L, grad_sigma L).

    Where V* has a kink (sine at sigma = 0, the log guard at sigma = 1/eps)
    the sigma part uses the supergradient closest to Phi(x); at other
    boundary points it is the one-sided limit, which can be infinite (exp
    at sigma = 0).
    """
    x = inst.check_x(x)
    s = _sigma_values(inst, sigma)
    grad_x = _gradient_x(inst, x, s)
    phis = phi(inst, x)
    lo, hi = inst.potential.v_conj_grad_interval(s)
    nearest = np.clip(phis, np.atleast_1d(lo), np.atleast_1d(hi))
    grad_sigma = inst.beta * (phis - nearest)
    return grad_x, grad_sigma


def stationarity_report(
    inst: ImplicitConcaveInstance, x, sigma, tol: float = DEFAULT_STATIONARITY_TOL
) -> StationarityReport:
    x = inst.check_x(x)
    grad_f = f_grad(inst, x)
    grad_x, grad_sigma = augmented_grad(inst, x, sigma)
    gap = abs(f_value(inst, x) - augmented_value(inst, x, sigma))

    norms = [float(np.max(np.abs(g))) if g.size else 0.0 for g in (grad_f, grad_x, grad_sigma)]
    ok = all(v <= tol for v in norms) and gap <= tol
    report = StationarityReport(
        grad_f_inf=norms[0],
        grad_x_inf=norms[1],
        grad_sigma_inf=norms[2],
        value_gap=gap,
        tolerance=tol,
        correspondence_ok=ok,
    )
    logger.debug(f"stationarity: {report}")
    return report
