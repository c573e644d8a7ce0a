from typing import Tuple

import numpy as np

from src.utils.errors import DimensionError, DomainError


class Grid:
    """A 1-D signal (width 1) or 2-D image stored as a flat row-major buffer.

    Values are nominally in [0, 1]; nothing enforces it until a PGM write.
    """

    def __init__(self, data, height: int, width: int = 1):
        arr = np.array(data, dtype=float).reshape(-1)
        if height < 1 or width < 1:
            raise DimensionError(f"grid shape must be positive, got {height}x{width}")
        if arr.size != height * width:
            raise DimensionError(f"buffer of {arr.size} values does not fit {height}x{width}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("grid entries must be finite")
        self.data = arr
        self.height = int(height)
        self.width = int(width)

    @classmethod
    def from_array(cls, values) -> "Grid":
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 1:
            return cls(arr, arr.size, 1)
        if arr.ndim == 2:
            return cls(arr, arr.shape[0], arr.shape[1])
        raise DimensionError(f"grids are 1-D or 2-D, got {arr.ndim} dimensions")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @property
    def is_1d(self) -> bool:
        return self.width == 1

    @property
    def size(self) -> int:
        return self.data.size

    def as_image(self) -> np.ndarray:
        return self.data.reshape(self.height, self.width)

    def with_data(self, data) -> "Grid":
        return Grid(data, self.height, self.width)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self) -> str:
        return f"Grid({self.height}x{self.width})"
