"""Matrix-free linear operators: data terms A and regularizer families {G_i}."""
import abc
import logging
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Union, overload

import numpy as np
from scipy.sparse.linalg import LinearOperator as ScipyLinearOperator

from src.utils.errors import ConfigError, DimensionError

logger = logging.getLogger(__name__)


class OperatorKind(str, Enum):
    IDENTITY = "identity"
    DENSE = "dense"
    DIFF_1D = "diff1d"
    GRAD_2D = "grad2d"
    BLUR = "blur"


class LinearOperator(abc.ABC):
    """A real linear map R^in_dim -> R^out_dim with its adjoint."""

    kind: OperatorKind

    def __init__(self, in_dim: int, out_dim: int):
        if in_dim < 1 or out_dim < 1:
            raise DimensionError(f"operator dimensions must be positive, got {out_dim}x{in_dim}")
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)

    @property
    def shape(self):
        return (self.out_dim, self.in_dim)

    @abc.abstractmethod
    def _apply(self, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _apply_adjoint(self, y: np.ndarray) -> np.ndarray: ...

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.in_dim,):
            raise DimensionError(f"{self.kind.value}: expected input of length {self.in_dim}, got {x.shape}")
        return self._apply(x)

    def apply_adjoint(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.out_dim,):
            raise DimensionError(f"{self.kind.value}: expected adjoint input of length {self.out_dim}, got {y.shape}")
        return self._apply_adjoint(y)

    def as_scipy(self) -> ScipyLinearOperator:
        return ScipyLinearOperator(
            shape=self.shape, matvec=self.apply, rmatvec=self.apply_adjoint, dtype=float
        )

    def to_dense(self) -> np.ndarray:
        """Materialize the matrix column by column; meant for small oracle problems."""
        eye = np.eye(self.in_dim)
        return np.column_stack([self._apply(eye[:, j]) for j in range(self.in_dim)])

    @property
    def is_identity(self) -> bool:
        return False

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.out_dim}x{self.in_dim})"


class IdentityOperator(LinearOperator):
    kind = OperatorKind.IDENTITY

    def __init__(self, n: int):
        super().__init__(n, n)

    def _apply(self, x):
        return x.copy()

    def _apply_adjoint(self, y):
        return y.copy()

    @property
    def is_identity(self) -> bool:
        return True


class DenseOperator(LinearOperator):
    kind = OperatorKind.DENSE

    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2:
            raise DimensionError(f"dense operator needs a 2-D matrix, got shape {matrix.shape}")
        super().__init__(matrix.shape[1], matrix.shape[0])
        self.matrix = matrix

    def _apply(self, x):
        return self.matrix @ x

    def _apply_adjoint(self, y):
        return self.matrix.T @ y

    def to_dense(self):
        return self.matrix.copy()


class Diff1DOperator(LinearOperator):
    """G_i x = x[i+1] - x[i], a 1 x n row."""

    kind = OperatorKind.DIFF_1D

    def __init__(self, n: int, index: int):
        super().__init__(n, 1)
        if not 0 <= index < n - 1:
            raise DimensionError(f"difference index {index} out of range for n={n}")
        self.index = index

    def _apply(self, x):
        return np.array([x[self.index + 1] - x[self.index]])

    def _apply_adjoint(self, y):
        out = np.zeros(self.in_dim)
        out[self.index] = -y[0]
        out[self.index + 1] = y[0]
        return out


class Grad2DOperator(LinearOperator):
    """Forward differences at pixel (row, col) of an h x w image, row-major.

    Output is (horizontal, vertical); a difference that would leave the
    image is 0.
    """

    kind = OperatorKind.GRAD_2D

    def __init__(self, height: int, width: int, row: int, col: int):
        super().__init__(height * width, 2)
        if not (0 <= row < height and 0 <= col < width):
            raise DimensionError(f"pixel ({row}, {col}) outside {height}x{width} image")
        self.height, self.width = height, width
        self.row, self.col = row, col

    @property
    def _pixel(self) -> int:
        return self.row * self.width + self.col

    def _apply(self, x):
        p = self._pixel
        dh = x[p + 1] - x[p] if self.col + 1 < self.width else 0.0
        dv = x[p + self.width] - x[p] if self.row + 1 < self.height else 0.0
        return np.array([dh, dv])

    def _apply_adjoint(self, y):
        out = np.zeros(self.in_dim)
        p = self._pixel
        if self.col + 1 < self.width:
            out[p] -= y[0]
            out[p + 1] += y[0]
        if self.row + 1 < self.height:
            out[p] -= y[1]
            out[p + self.width] += y[1]
        return out


def _replicate_index(length: int, taps: int) -> np.ndarray:
    """idx[i, k] = clip(i + c - k, 0, length - 1) with c the kernel centre."""
    centre = taps // 2
    i = np.arange(length)[:, None]
    k = np.arange(taps)[None, :]
    return np.clip(i + centre - k, 0, length - 1)


class BlurOperator(LinearOperator):
    """Separable convolution with a normalized odd kernel and replicate boundary.

    The same 1-D kernel runs along columns then rows; for a 1-D signal
    (width 1) only the first pass is applied.
    """

    kind = OperatorKind.BLUR

    def __init__(self, kernel: Sequence[float], height: int, width: int = 1):
        taps = np.asarray(kernel, dtype=float)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise ConfigError(f"blur kernel must have odd length, got {taps.size}")
        if abs(taps.sum() - 1.0) > 1e-9:
            raise ConfigError(f"blur kernel taps must sum to 1, got {taps.sum()!r}")
        super().__init__(height * width, height * width)
        self.kernel = taps
        self.height, self.width = height, width
        self._rows_idx = _replicate_index(height, taps.size)
        self._cols_idx = _replicate_index(width, taps.size) if width > 1 else None

    def _apply(self, x):
        img = x.reshape(self.height, self.width)
        # along axis 0
        img = np.einsum("ikw,k->iw", img[self._rows_idx], self.kernel)
        if self._cols_idx is not None:
            img = np.einsum("hjk,k->hj", img[:, self._cols_idx], self.kernel)
        return img.ravel()

    def _apply_adjoint(self, y):
        img = y.reshape(self.height, self.width)
        if self._cols_idx is not None:
            spread = img[:, :, None] * self.kernel[None, None, :]
            acc = np.zeros_like(img)
            np.add.at(acc, (slice(None), self._cols_idx), spread)
            img = acc
        spread = img[:, None, :] * self.kernel[None, :, None]
        acc = np.zeros_like(img)
        np.add.at(acc, self._rows_idx, spread)
        return acc.ravel()

    def __repr__(self):
        return f"BlurOperator(kernel={self.kernel.tolist()}, {self.height}x{self.width})"


class OperatorFamily(Sequence[LinearOperator]):
    """The regularizer family {G_i}, all sharing in_dim and out_dim.

    ``apply_all`` stacks every G_i x as the rows of an (r, s) array and
    ``adjoint_all`` returns sum_i G_i^T y_i.
    """

    def __init__(self, operators: Sequence[LinearOperator]):
        operators = list(operators)
        if not operators:
            raise DimensionError("regularizer family must not be empty")
        in_dim, out_dim = operators[0].in_dim, operators[0].out_dim
        for op in operators:
            if op.in_dim != in_dim or op.out_dim != out_dim:
                raise DimensionError(
                    f"family members must share shape {out_dim}x{in_dim}, got {op.out_dim}x{op.in_dim}"
                )
        self._operators: List[LinearOperator] = operators
        self.in_dim = in_dim
        self.out_dim = out_dim

    @overload
    def __getitem__(self, index: int) -> LinearOperator: ...

    @overload
    def __getitem__(self, index: slice) -> Sequence[LinearOperator]: ...

    def __getitem__(self, index):
        return self._operators[index]

    def __len__(self) -> int:
        return len(self._operators)

    def __iter__(self) -> Iterator[LinearOperator]:
        return iter(self._operators)

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.in_dim,):
            raise DimensionError(f"family expects input of length {self.in_dim}, got {x.shape}")
        return x

    def _check_y(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (len(self), self.out_dim):
            raise DimensionError(f"family adjoint expects shape {(len(self), self.out_dim)}, got {y.shape}")
        return y

    def apply_all(self, x) -> np.ndarray:
        x = self._check_x(x)
        return np.stack([op.apply(x) for op in self._operators])

    def adjoint_all(self, y) -> np.ndarray:
        y = self._check_y(y)
        out = np.zeros(self.in_dim)
        for op, yi in zip(self._operators, y):
            out += op.apply_adjoint(yi)
        return out

    def weighted_gram(self, weights, x) -> np.ndarray:
        """sum_i w_i G_i^T G_i x."""
        weights = np.asarray(weights, dtype=float)
        return self.adjoint_all(weights[:, None] * self.apply_all(x))


class Diff1DFamily(OperatorFamily):
    """All n-1 forward differences of a length-n signal, vectorized."""

    def __init__(self, n: int):
        if n < 2:
            raise DimensionError(f"difference family needs n >= 2, got {n}")
        super().__init__([Diff1DOperator(n, i) for i in range(n - 1)])
        self.n = n

    def apply_all(self, x):
        x = self._check_x(x)
        return np.diff(x)[:, None]

    def adjoint_all(self, y):
        d = self._check_y(y)[:, 0]
        out = np.zeros(self.n)
        out[:-1] -= d
        out[1:] += d
        return out


class Grad2DFamily(OperatorFamily):
    """Per-pixel forward-difference gradients of an h x w image, vectorized."""

    def __init__(self, height: int, width: int):
        if height < 2 or width < 2:
            raise DimensionError(f"gradient family needs at least 2x2 pixels, got {height}x{width}")
        super().__init__(
            [Grad2DOperator(height, width, r, c) for r in range(height) for c in range(width)]
        )
        self.height, self.width = height, width

    def apply_all(self, x):
        img = self._check_x(x).reshape(self.height, self.width)
        dh = np.zeros_like(img)
        dv = np.zeros_like(img)
        dh[:, :-1] = img[:, 1:] - img[:, :-1]
        dv[:-1, :] = img[1:, :] - img[:-1, :]
        return np.stack([dh.ravel(), dv.ravel()], axis=1)

    def adjoint_all(self, y):
        y = self._check_y(y)
        dh = y[:, 0].reshape(self.height, self.width)
        dv = y[:, 1].reshape(self.height, self.width)
        out = np.zeros((self.height, self.width))
        out[:, :-1] -= dh[:, :-1]
        out[:, 1:] += dh[:, :-1]
        out[:-1, :] -= dv[:-1, :]
        out[1:, :] += dv[:-1, :]
        return out.ravel()


def make_difference_1d(n: int) -> Diff1DFamily:
    return Diff1DFamily(n)


def make_gradient_2d(height: int, width: int) -> Grad2DFamily:
    return Grad2DFamily(height, width)


def make_blur(kernel: Sequence[float], height: int, width: int = 1) -> Union[BlurOperator, IdentityOperator]:
    """Blur operator for `kernel`; the single tap [1] collapses to the identity."""
    taps = np.asarray(kernel, dtype=float)
    if taps.size == 1 and taps[0] == 1.0:
        return IdentityOperator(height * width)
    return BlurOperator(taps, height, width)


def make_regularizers(kind: str, height: int, width: int = 1) -> Optional[OperatorFamily]:
    """Regularizer family by name: 'diff1d', 'grad2d', or 'auto' (by grid shape)."""
    if kind == "auto":
        # single rows and columns are signals
        kind = OperatorKind.DIFF_1D.value if min(height, width) == 1 else OperatorKind.GRAD_2D.value
    if kind == OperatorKind.DIFF_1D.value:
        return make_difference_1d(height * width)
    if kind == OperatorKind.GRAD_2D.value:
        return make_gradient_2d(height, width)
    raise ConfigError(f"unknown regularizer operator {kind!r}")
