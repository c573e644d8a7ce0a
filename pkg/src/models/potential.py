"""Edge-preserving potentials psi(t) = V(t^2) and their half-quadratic data.

Every potential exposes psi, its concave lift V with first and second
derivative, the concave conjugate V*(sigma) = inf_{y >= 0} (y sigma - V(y))
with its gradient (the inverse of grad V), and the half-quadratic weight
psi'(t) / (2t) = grad V(t^2).

All methods accept a float or an ndarray and return the same kind.

The conjugates are derived from the inf definition over admissible y >= 0.
The commonly tabulated closed forms differ from them by additive constants
(exp, sine) or by sign (geman-mcclure); they are kept in
``tabulated_v_conj`` for reporting only.
"""
import abc
import logging
import math
from enum import Enum
from typing import Dict, Sequence, Type, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.cli.schemas import AssumptionReport
from src.utils.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

HALF_PI = math.pi / 2.0
DEFAULT_LOG_EPSILON = 1e-8


class PotentialName(str, Enum):
    EXP_SQUARE = "exp"
    GEMAN_MCCLURE = "geman-mcclure"
    LOG_SQUARE = "log"
    SINE_CLIP = "sine"


class SigmaDomain(BaseModel):
    """Real interval D of admissible augmented variables."""

    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float
    lower_closed: bool
    upper_closed: bool

    def closure_contains(self, sigma: ArrayLike) -> bool:
        s = np.asarray(sigma, dtype=float)
        return bool(np.all((s >= self.lower) & (s <= self.upper)))

    def distance_to_boundary(self, sigma: ArrayLike) -> float:
        s = np.asarray(sigma, dtype=float)
        return float(np.min(np.minimum(s - self.lower, self.upper - s)))

    def __str__(self) -> str:
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        return f"{left}{self.lower:g}, {self.upper:g}{right}"


def _out(value: np.ndarray, like) -> ArrayLike:
    return float(value) if np.ndim(like) == 0 else value


def _as_array(value: ArrayLike, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} must be finite")
    return arr


class Potential(abc.ABC):
    """An edge-preserving potential psi with its concave lift V.

    Subclasses implement the guarded formulas (``_v``, ``_v_grad``,
    ``_v_hess``, ``_v_conj``, ``_v_conj_grad``) for every admissible input;
    the public methods validate domains first.
    """

    name: PotentialName
    zero_limit_weight: float
    sigma_domain: SigmaDomain
    # psi >= 0 with psi(0) = 0, which makes 0 a lower bound of f
    nonnegative: bool = True

    @abc.abstractmethod
    def _v(self, y: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _v_grad(self, y: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _v_hess(self, y: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _v_conj(self, sigma: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _v_conj_grad(self, sigma: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def tabulated_v_conj(self, sigma: ArrayLike) -> ArrayLike:
        """The commonly published closed form of V*, kept for comparison only."""

    @property
    def id(self) -> str:
        return self.name.value

    # -- domain checks -------------------------------------------------

    def _check_y(self, y: np.ndarray, strict: bool) -> None:
        if np.any(y < 0):
            raise DomainError(f"{self.id}: V is defined for y >= 0, got min {float(np.min(y))!r}")

    def check_sigma(self, sigma: np.ndarray) -> None:
        if not self.sigma_domain.closure_contains(sigma):
            raise DomainError(f"{self.id}: sigma outside D = {self.sigma_domain}")

    # -- public API ----------------------------------------------------

    def psi(self, t: ArrayLike) -> ArrayLike:
        arr = _as_array(t, "t")
        return _out(self.v(arr * arr), t)

    def v(self, y: ArrayLike, strict: bool = True) -> ArrayLike:
        """V(y). ``strict=False`` admits the guarded boundary point y = 0."""
        arr = _as_array(y, "y")
        self._check_y(arr, strict)
        return _out(self._v(arr), y)

    def v_grad(self, y: ArrayLike, strict: bool = True) -> ArrayLike:
        arr = _as_array(y, "y")
        self._check_y(arr, strict)
        return _out(self._v_grad(arr), y)

    def v_hess(self, y: ArrayLike, strict: bool = True) -> ArrayLike:
        arr = _as_array(y, "y")
        self._check_y(arr, strict)
        return _out(self._v_hess(arr), y)

    def v_conj(self, sigma: ArrayLike) -> ArrayLike:
        arr = _as_array(sigma, "sigma")
        self.check_sigma(arr)
        return _out(self._v_conj(arr), sigma)

    def v_conj_grad(self, sigma: ArrayLike) -> ArrayLike:
        """grad V*(sigma): the y >= 0 attaining the infimum, i.e. (grad V)^-1(sigma).

        At the boundary of D the one-sided limit is returned (may be inf).
        """
        arr = _as_array(sigma, "sigma")
        self.check_sigma(arr)
        return _out(self._v_conj_grad(arr), sigma)

    def v_conj_grad_interval(self, sigma: ArrayLike):
        """Superdifferential of V* at sigma as (lower, upper) bounds.

        It equals {grad V*(sigma)} except where grad V is flat, which makes
        the preimage of sigma an interval.
        """
        arr = _as_array(sigma, "sigma")
        self.check_sigma(arr)
        lo, hi = self._v_conj_grad_interval(arr)
        return _out(lo, sigma), _out(hi, sigma)

    def _v_conj_grad_interval(self, sigma):
        g = self._v_conj_grad(sigma)
        return g, g

    def weight(self, t: ArrayLike) -> ArrayLike:
        """Half-quadratic weight psi'(t) / (2t) = grad V(t^2), with the limit M at t = 0."""
        arr = _as_array(t, "t")
        if np.any(arr < 0):
            raise DomainError(f"{self.id}: weight needs t >= 0")
        w = self._v_grad(arr * arr)
        w = np.where(arr == 0, self._weight_at_zero(), w)
        return _out(w, t)

    def _weight_at_zero(self) -> float:
        return self.zero_limit_weight

    def psi_prime(self, t: ArrayLike) -> ArrayLike:
        arr = _as_array(t, "t")
        return _out(2.0 * arr * self._v_grad(arr * arr), t)

    def check_assumptions(self, t_grid: Sequence[float]) -> AssumptionReport:
        """Evaluate the edge-preserving assumptions numerically on a grid of t > 0."""
        t = np.asarray(t_grid, dtype=float)
        if t.ndim != 1 or t.size < 10:
            raise DomainError("t_grid needs at least 10 points")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise DomainError("t_grid must be positive and strictly increasing")

        try:
            at_zero = self.psi(0.0)
            zero_ok = at_zero == 0.0 and bool(np.all(self.psi(t) >= 0))
        except DomainError:
            zero_ok = False

        symmetric = bool(np.allclose(self.psi(t), self.psi(-t), rtol=0, atol=1e-12))

        # psi' from central differences must match the chain rule 2t V'(t^2)
        h = 1e-6 * (1.0 + t)
        fd = (self.psi(t + h) - self.psi(t - h)) / (2.0 * h)
        analytic = self.psi_prime(t)
        c1 = bool(np.all(np.abs(fd - analytic) <= 1e-4 * (1.0 + np.abs(analytic))))

        nondecreasing = bool(np.all(analytic >= 0))

        w = self.weight(t)
        steps = np.diff(w)
        positive = w[:-1] > 0
        decreasing = bool(np.all(steps <= 0) and np.all(steps[positive] < 0))

        vanishes = bool(self.weight(100.0) < 1e-3)

        m = self.zero_limit_weight
        limit_ok = 0.0 < m < math.inf and abs(self.weight(1e-6 * t[0]) - m) <= 1e-6 * m

        report = AssumptionReport(
            potential=self.id,
            nonnegative_with_zero_at_origin=zero_ok,
            symmetric=symmetric,
            continuously_differentiable=c1,
            nondecreasing_on_positive_axis=nondecreasing,
            weight_strictly_decreasing=decreasing,
            weight_vanishes_at_infinity=vanishes,
            finite_positive_zero_limit=limit_ok,
        )
        if report.failures:
            logger.info(f"{self.id}: assumption clauses failing: {', '.join(report.failures)}")
        return report

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class ExpSquare(Potential):
    """psi(t) = 1 - exp(-t^2)."""

    name = PotentialName.EXP_SQUARE
    zero_limit_weight = 1.0
    sigma_domain = SigmaDomain(lower=0.0, upper=1.0, lower_closed=False, upper_closed=True)

    def _v(self, y):
        return -np.expm1(-y)

    def _v_grad(self, y):
        return np.exp(-y)

    def _v_hess(self, y):
        return -np.exp(-y)

    def _v_conj(self, sigma):
        # sigma (1 - log sigma) - 1, with the limit -1 at sigma = 0
        safe = np.where(sigma > 0, sigma, 1.0)
        return np.where(sigma > 0, safe * (1.0 - np.log(safe)) - 1.0, -1.0)

    def _v_conj_grad(self, sigma):
        with np.errstate(divide="ignore"):
            return -np.log(sigma)

    def tabulated_v_conj(self, sigma):
        s = np.asarray(sigma, dtype=float)
        return _out(-s * (np.log(s) - 1.0), sigma)


class GemanMcClure(Potential):
    """psi(t) = t^2 / (1 + t^2)."""

    name = PotentialName.GEMAN_MCCLURE
    zero_limit_weight = 1.0
    sigma_domain = SigmaDomain(lower=0.0, upper=1.0, lower_closed=False, upper_closed=True)

    def _v(self, y):
        return y / (1.0 + y)

    def _v_grad(self, y):
        return 1.0 / (1.0 + y) ** 2

    def _v_hess(self, y):
        return -2.0 / (1.0 + y) ** 3

    def _v_conj(self, sigma):
        return -(1.0 - np.sqrt(sigma)) ** 2

    def _v_conj_grad(self, sigma):
        with np.errstate(divide="ignore"):
            return 1.0 / np.sqrt(sigma) - 1.0

    def tabulated_v_conj(self, sigma):
        s = np.asarray(sigma, dtype=float)
        return _out((s - np.sqrt(s)) ** 2 / s, sigma)


class LogSquare(Potential):
    """psi(t) = log(t^2), guarded below y = epsilon.

    psi(0) is undefined and f is unbounded below without a guard. For
    y < epsilon, V is replaced by its tangent line at epsilon, which keeps V
    concave and C^1 and caps the weight at 1/epsilon.
    """

    name = PotentialName.LOG_SQUARE
    zero_limit_weight = math.inf
    sigma_domain = SigmaDomain(lower=0.0, upper=math.inf, lower_closed=False, upper_closed=False)
    nonnegative = False

    def __init__(self, epsilon: float = DEFAULT_LOG_EPSILON):
        if not (epsilon > 0 and math.isfinite(epsilon)):
            raise DomainError(f"log epsilon must be positive, got {epsilon!r}")
        self.epsilon = float(epsilon)

    def _check_y(self, y, strict):
        super()._check_y(y, strict)
        if strict and np.any(y == 0):
            raise DomainError("log: V(y) = log y needs y > 0")

    def check_sigma(self, sigma):
        if np.any(sigma <= 0):
            raise DomainError(f"log: sigma outside D = {self.sigma_domain}")

    def _v(self, y):
        eps = self.epsilon
        floored = np.maximum(y, eps)
        return np.where(y >= eps, np.log(floored), math.log(eps) + (y - eps) / eps)

    def _v_grad(self, y):
        return 1.0 / np.maximum(y, self.epsilon)

    def _v_hess(self, y):
        floored = np.maximum(y, self.epsilon)
        return np.where(y >= self.epsilon, -1.0 / floored ** 2, 0.0)

    def _weight_at_zero(self):
        return 1.0 / self.epsilon

    def _v_conj(self, sigma):
        return 1.0 + np.log(np.minimum(sigma, 1.0 / self.epsilon))

    def _v_conj_grad(self, sigma):
        return np.where(sigma <= 1.0 / self.epsilon, 1.0 / sigma, 0.0)

    def _v_conj_grad_interval(self, sigma):
        g = self._v_conj_grad(sigma)
        # every y in [0, epsilon] maps to the capped weight 1/epsilon
        return np.where(sigma == 1.0 / self.epsilon, 0.0, g), g

    def tabulated_v_conj(self, sigma):
        s = np.asarray(sigma, dtype=float)
        return _out(1.0 + np.log(s), sigma)

    def __repr__(self):
        return f"LogSquare(epsilon={self.epsilon!r})"


class SineClip(Potential):
    """psi(t) = sin(t^2) for t^2 <= pi/2, and 1 beyond."""

    name = PotentialName.SINE_CLIP
    zero_limit_weight = 1.0
    sigma_domain = SigmaDomain(lower=0.0, upper=1.0, lower_closed=True, upper_closed=True)

    def _v(self, y):
        return np.where(y <= HALF_PI, np.sin(np.minimum(y, HALF_PI)), 1.0)

    def _v_grad(self, y):
        return np.where(y <= HALF_PI, np.cos(np.minimum(y, HALF_PI)), 0.0)

    def _v_hess(self, y):
        return np.where(y <= HALF_PI, -np.sin(np.minimum(y, HALF_PI)), 0.0)

    def _v_conj(self, sigma):
        return sigma * np.arccos(sigma) - np.sqrt(1.0 - sigma ** 2)

    def _v_conj_grad(self, sigma):
        # sigma = 0 maps to the seam y = pi/2, where the clipped branch starts
        return np.arccos(sigma)

    def _v_conj_grad_interval(self, sigma):
        g = self._v_conj_grad(sigma)
        return g, np.where(sigma == 0, math.inf, g)

    def tabulated_v_conj(self, sigma):
        s = np.asarray(sigma, dtype=float)
        return _out(s * np.arccos(s) - np.sin(np.arccos(s)) - 1.0, sigma)


POTENTIALS: Dict[str, Type[Potential]] = {
    PotentialName.EXP_SQUARE.value: ExpSquare,
    PotentialName.GEMAN_MCCLURE.value: GemanMcClure,
    PotentialName.LOG_SQUARE.value: LogSquare,
    PotentialName.SINE_CLIP.value: SineClip,
}


def get_potential(potential_id: str, log_epsilon: float = DEFAULT_LOG_EPSILON) -> Potential:
    """Build a catalog potential from its lowercase id."""
    try:
        cls = POTENTIALS[potential_id]
    except KeyError:
        raise DomainError(
            f"unknown potential {potential_id!r}; expected one of {', '.join(POTENTIALS)}"
        )
    if cls is LogSquare:
        return LogSquare(epsilon=log_epsilon)
    return cls()


def all_potentials(log_epsilon: float = DEFAULT_LOG_EPSILON):
    return [get_potential(pid, log_epsilon) for pid in POTENTIALS]
