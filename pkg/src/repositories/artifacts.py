import io
import logging
import os
from typing import Dict, Mapping

import pandas as pd

from src.cli.schemas import TRACE_COLUMNS, SolverTrace, TraceRecord
from src.repositories.base import BaseRepository
from src.repositories.csv_grid import FLOAT_FORMAT
from src.utils.errors import FormatError

logger = logging.getLogger(__name__)

TRACE_SUFFIX = ".trace.csv"
METRICS_SUFFIX = ".metrics.txt"
NOT_CONVERGED_SUFFIX = ".not_converged"


class TraceRepository(BaseRepository[SolverTrace]):
    """`<output>.trace.csv` with header iter,f,L,grad_inf,dx,cg_iters."""

    suffixes = (".csv",)

    def read(self, path: str) -> SolverTrace:
        frame = pd.read_csv(io.BytesIO(self._read_bytes(path)))
        if list(frame.columns) != TRACE_COLUMNS:
            raise FormatError(f"{path}: trace header must be {','.join(TRACE_COLUMNS)}", line=1)
        trace = SolverTrace()
        for row in frame.itertuples(index=False):
            trace.append(
                TraceRecord(
                    iteration=int(row.iter),
                    f=float(row.f),
                    augmented=float(row.L),
                    grad_inf=float(row.grad_inf),
                    dx=float(row.dx),
                    cg_iters=int(row.cg_iters),
                )
            )
        return trace

    def write(self, trace: SolverTrace, path: str) -> None:
        text = trace.to_frame().to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self._write_bytes(path, text.encode("ascii"))


class MetricsRepository(BaseRepository[Dict[str, str]]):
    """Flat key=value lines, in insertion order."""

    suffixes = (".txt",)

    def read(self, path: str) -> Dict[str, str]:
        entries: Dict[str, str] = {}
        for line in self._read_bytes(path).decode("utf-8").splitlines():
            if line.strip():
                key, _, value = line.partition("=")
                entries[key.strip()] = value.strip()
        return entries

    def write(self, entries: Mapping[str, str], path: str) -> None:
        text = "".join(f"{key}={value}\n" for key, value in entries.items())
        self._write_bytes(path, text.encode("utf-8"))


class RunArtifacts:
    """Side files written next to a reconstructed grid."""

    def __init__(self, output: str):
        self.output = output
        self.trace_path = output + TRACE_SUFFIX
        self.metrics_path = output + METRICS_SUFFIX
        self.marker_path = output + NOT_CONVERGED_SUFFIX
        self.traces = TraceRepository()
        self.metrics = MetricsRepository()

    def write_trace(self, trace: SolverTrace) -> None:
        self.traces.write(trace, self.trace_path)

    def write_metrics(self, entries: Mapping[str, str]) -> None:
        self.metrics.write(entries, self.metrics_path)

    def mark_not_converged(self, reason: str) -> None:
        self.metrics._write_bytes(self.marker_path, f"{reason}\n".encode("utf-8"))
        logger.warning(f"wrote not-converged marker {self.marker_path}")

    def clear_marker(self) -> None:
        if os.path.exists(self.marker_path):
            os.remove(self.marker_path)
