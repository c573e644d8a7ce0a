import logging
import math
from typing import Tuple

import numpy as np

from src.models.grid import Grid
from src.utils.errors import ConfigError, DimensionError
from src.utils.prng import Xoshiro256StarStar

logger = logging.getLogger(__name__)

# mse below this prints as an infinite PSNR
PSNR_MSE_FLOOR = 1e-30


def gaussian_noise(count: int, std: float, seed: int) -> np.ndarray:
    if std < 0:
        raise ConfigError(f"noise std must be >= 0, got {std!r}")
    if std == 0:
        return np.zeros(count)
    return std * Xoshiro256StarStar(seed).normals(count)


def add_noise(grid: Grid, std: float, seed: int) -> Grid:
    """Zero-mean Gaussian noise, deterministic per (seed, shape)."""
    if std == 0:
        return grid.with_data(grid.data.copy())
    logger.debug(f"adding gaussian noise: std={std}, seed={seed}, shape={grid.shape}")
    return grid.with_data(grid.data + gaussian_noise(grid.size, std, seed))


def metrics(out: Grid, ref: Grid) -> Tuple[float, float]:
    """(mse, psnr) for signals nominally in [0, 1]."""
    if out.shape != ref.shape:
        raise DimensionError(f"metric shapes differ: {out.shape} vs {ref.shape}")
    diff = out.data - ref.data
    mse = float(np.mean(diff * diff))
    psnr = math.inf if mse < PSNR_MSE_FLOOR else 10.0 * math.log10(1.0 / mse)
    return mse, psnr


def format_metric(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))
