import logging
from typing import Optional

import numpy as np

from src.models.linops import LinearOperator, OperatorFamily
from src.models.potential import Potential
from src.utils.errors import ConfigError, DimensionError, DomainError

logger = logging.getLogger(__name__)


class ReconstructionProblem:
    """min_x ||Ax - b||^2 + beta * sum_i psi(||G_i x||)."""

    def __init__(
        self,
        A: LinearOperator,
        b,
        regularizers: OperatorFamily,
        beta: float,
        potential: Potential,
    ):
        if not (beta > 0 and np.isfinite(beta)):
            raise ConfigError(f"beta must be positive, got {beta!r}")
        b = np.array(b, dtype=float)
        if b.shape != (A.out_dim,):
            raise DimensionError(f"b has shape {b.shape}, A expects ({A.out_dim},)")
        if not np.all(np.isfinite(b)):
            raise DomainError("b must be finite")
        if regularizers.in_dim != A.in_dim:
            raise DimensionError(
                f"regularizers act on R^{regularizers.in_dim}, A on R^{A.in_dim}"
            )
        b.setflags(write=False)
        self.A = A
        self.b = b
        self.regularizers = regularizers
        self.beta = float(beta)
        self.potential = potential

    def __repr__(self) -> str:
        return (
            f"ReconstructionProblem(A={self.A!r}, m={len(self.regularizers)}, "
            f"beta={self.beta!r}, potential={self.potential!r})"
        )


class ImplicitConcaveInstance:
    """f(x) = V(Phi(x)) specialised to Phi_i(x) = ||G_i x||^2, plus the data term."""

    def __init__(self, problem: ReconstructionProblem):
        self.problem = problem
        self._adjoint_b: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.problem.A.in_dim

    @property
    def m(self) -> int:
        return len(self.problem.regularizers)

    @property
    def s(self) -> int:
        return self.problem.regularizers.out_dim

    @property
    def r(self) -> int:
        return self.problem.A.out_dim

    @property
    def potential(self) -> Potential:
        return self.problem.potential

    @property
    def beta(self) -> float:
        return self.problem.beta

    @property
    def adjoint_b(self) -> np.ndarray:
        """A^T b, cached."""
        if self._adjoint_b is None:
            value = self.problem.A.apply_adjoint(self.problem.b)
            value.setflags(write=False)
            self._adjoint_b = value
        return self._adjoint_b

    def check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(f"x must have shape ({self.n},), got {x.shape}")
        return x

    def __repr__(self) -> str:
        return f"ImplicitConcaveInstance(n={self.n}, m={self.m}, s={self.s}, r={self.r})"


class SigmaVector:
    """Augmented variables sigma in D^m; read-only once built."""

    def __init__(self, values, potential: Potential):
        arr = np.array(values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise DomainError("sigma entries must be finite")
        if np.any(arr < 0):
            raise DomainError(f"sigma entries must be >= 0, got min {float(arr.min())!r}")
        if not potential.sigma_domain.closure_contains(arr):
            raise DomainError(f"sigma outside D = {potential.sigma_domain} for {potential.id}")
        arr.setflags(write=False)
        self.values = arr
        self.potential = potential

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def check_length(self, m: int) -> "SigmaVector":
        if len(self) != m:
            raise DimensionError(f"sigma must have length {m}, got {len(self)}")
        return self

    def __repr__(self) -> str:
        return f"SigmaVector(m={len(self)}, min={self.values.min():.3g}, max={self.values.max():.3g})"
