"""Greyscale netpbm images: P2 (ASCII) and P5 (binary) read, P5 written."""
import logging
from typing import List, Tuple

import numpy as np

from src.models.grid import Grid
from src.repositories.base import BaseRepository
from src.utils.errors import FormatError

logger = logging.getLogger(__name__)

MAX_MAXVAL = 65535
WRITE_MAXVAL = 255
_WHITESPACE = b" \t\r\n\x0b\x0c"


class _HeaderReader:
    """Whitespace/comment aware token reader that tracks line and byte offsets."""

    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.pos = 0

    def line_of(self, pos: int) -> int:
        return self.data.count(b"\n", 0, pos) + 1

    def error(self, message: str, pos: int = None) -> FormatError:
        pos = self.pos if pos is None else pos
        return FormatError(f"{self.path}: {message}", line=self.line_of(pos), byte=pos)

    def skip_space(self) -> None:
        data = self.data
        while self.pos < len(data):
            ch = data[self.pos:self.pos + 1]
            if ch == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            elif ch in _WHITESPACE:
                self.pos += 1
            else:
                break

    def token(self, what: str) -> Tuple[bytes, int]:
        self.skip_space()
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos:self.pos + 1] not in _WHITESPACE + b"#":
            self.pos += 1
        if start == self.pos:
            raise self.error(f"unexpected end of file, expected {what}")
        return self.data[start:self.pos], start

    def integer(self, what: str) -> int:
        tok, start = self.token(what)
        if not tok.isdigit():
            raise self.error(f"expected {what}, got {tok[:16]!r}", start)
        return int(tok)


class PgmGridRepository(BaseRepository[Grid]):
    suffixes = (".pgm",)

    def read(self, path: str) -> Grid:
        data = self._read_bytes(path)
        reader = _HeaderReader(data, path)

        magic, _ = reader.token("magic number")
        if magic not in (b"P2", b"P5"):
            raise reader.error(f"unsupported magic {magic[:8]!r}, expected P2 or P5", 0)
        width = reader.integer("width")
        height = reader.integer("height")
        maxval = reader.integer("maxval")
        if width < 1 or height < 1:
            raise reader.error(f"image size must be positive, got {width}x{height}")
        if not 0 < maxval <= MAX_MAXVAL:
            raise reader.error(f"maxval must be in 1..{MAX_MAXVAL}, got {maxval}")

        count = width * height
        if magic == b"P5":
            pixels = self._binary_pixels(reader, count, maxval)
        else:
            pixels = self._ascii_pixels(reader, count)
        if np.any(pixels > maxval):
            raise FormatError(f"{path}: pixel value exceeds maxval {maxval}")

        logger.debug(f"read {magic.decode()} {width}x{height} image (maxval {maxval}) from {path}")
        return Grid(pixels.astype(float) / maxval, height, width)

    def _binary_pixels(self, reader: _HeaderReader, count: int, maxval: int) -> np.ndarray:
        data = reader.data
        if reader.pos >= len(data) or data[reader.pos:reader.pos + 1] not in _WHITESPACE:
            raise reader.error("expected a single whitespace byte before the raster")
        start = reader.pos + 1
        # 16-bit samples are big-endian
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        needed = count * dtype.itemsize
        if len(data) - start < needed:
            raise reader.error(
                f"raster truncated: need {needed} bytes, found {len(data) - start}", len(data)
            )
        return np.frombuffer(data, dtype=dtype, count=count, offset=start).astype(np.int64)

    def _ascii_pixels(self, reader: _HeaderReader, count: int) -> np.ndarray:
        values: List[int] = []
        for _ in range(count):
            values.append(reader.integer("pixel value"))
        return np.asarray(values, dtype=np.int64)

    def write(self, grid: Grid, path: str) -> None:
        clamped = np.clip(grid.data, 0.0, 1.0)
        # half away from zero; values are non-negative after clamping
        quantized = np.floor(clamped * WRITE_MAXVAL + 0.5).astype(np.uint8)
        header = f"P5\n{grid.width} {grid.height}\n{WRITE_MAXVAL}\n".encode("ascii")
        self._write_bytes(path, header + quantized.tobytes())
