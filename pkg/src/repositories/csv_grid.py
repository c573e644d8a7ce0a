import io
import logging
import re

import numpy as np
import pandas as pd

from src.models.grid import Grid
from src.repositories.base import BaseRepository
from src.utils.errors import FormatError

logger = logging.getLogger(__name__)

# 17 significant digits round-trip every double
FLOAT_FORMAT = "%.17g"

_PANDAS_LINE = re.compile(r"line (\d+)")


class CsvGridRepository(BaseRepository[Grid]):
    """One value per line for signals, comma-separated rows for images."""

    suffixes = (".csv", ".txt")

    def read(self, path: str) -> Grid:
        raw = self._read_bytes(path)
        try:
            frame = pd.read_csv(
                io.BytesIO(raw),
                header=None,
                dtype=str,
                keep_default_na=False,
                skip_blank_lines=False,
            )
        except pd.errors.EmptyDataError:
            raise FormatError(f"{path}: empty CSV file", line=1)
        except pd.errors.ParserError as e:
            match = _PANDAS_LINE.search(str(e))
            line = int(match.group(1)) if match else None
            raise FormatError(f"{path}: ragged CSV rows", line=line) from e

        cells = frame.apply(lambda column: column.str.strip())
        numeric = cells.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(numeric)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise FormatError(
                f"{path}: not a finite number: {cells.iat[row, col]!r} in column {col + 1}",
                line=int(row) + 1,
            )
        height, width = numeric.shape
        logger.debug(f"read {height}x{width} grid from {path}")
        return Grid(numeric, height, width)

    def write(self, grid: Grid, path: str) -> None:
        frame = pd.DataFrame(grid.as_image())
        text = frame.to_csv(header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self._write_bytes(path, text.encode("ascii"))
