import logging
import os
from typing import Dict, Optional

import numpy as np

from src.cli.schemas import RunConfig, SolverTrace
from src.models.grid import Grid
from src.models.linops import IdentityOperator, LinearOperator, make_blur, make_regularizers
from src.models.potential import get_potential
from src.models.problem import ImplicitConcaveInstance, ReconstructionProblem
from src.repositories.artifacts import RunArtifacts
from src.repositories.base import BaseRepository
from src.repositories.csv_grid import CsvGridRepository
from src.repositories.pgm_grid import PgmGridRepository
from src.services.hq_solver import HalfQuadraticSolver
from src.services.measurements import add_noise, format_metric, metrics
from src.utils.errors import ConfigError, NotConverged

logger = logging.getLogger(__name__)

DENOISE = "denoise"
DEBLUR = "deblur"


class ReconstructionOutcome:
    def __init__(
        self,
        output: Grid,
        observed: Grid,
        reference: Optional[Grid],
        trace: SolverTrace,
        converged: bool,
        metrics: Dict[str, str],
    ):
        self.output = output
        self.observed = observed
        self.reference = reference
        self.trace = trace
        self.converged = converged
        self.metrics = metrics


class ReconstructionService:
    def __init__(self, repositories: Optional[Dict[str, BaseRepository[Grid]]] = None):
        self.repositories = repositories or {
            "csv": CsvGridRepository(),
            "pgm": PgmGridRepository(),
        }

    def resolve_format(self, path: str, fmt: Optional[str]) -> str:
        if fmt is not None:
            if fmt not in self.repositories:
                raise ConfigError(f"unknown grid format {fmt!r}")
            return fmt
        for name, repository in self.repositories.items():
            if repository.handles(path):
                return name
        raise ConfigError(f"cannot infer grid format from {path!r}; pass --format")

    def read_grid(self, path: str, fmt: Optional[str] = None) -> Grid:
        return self.repositories[self.resolve_format(path, fmt)].read(path)

    def write_grid(self, grid: Grid, path: str, fmt: Optional[str] = None) -> None:
        self.repositories[self.resolve_format(path, fmt)].write(grid, path)

    def observe(self, cfg: RunConfig, mode: str, source: Grid, clean: Optional[Grid]):
        """Build (A, b, reference) for a run from the input grid."""
        h, w = source.shape
        reference = clean
        if mode == DEBLUR:
            A: LinearOperator = make_blur(cfg.kernel_taps, h, w)
        else:
            A = IdentityOperator(source.size)

        if mode == DEBLUR and cfg.simulate:
            base = source.with_data(A.apply(source.data))
            if reference is None:
                reference = source
        else:
            base = source
            if reference is None and cfg.noise_std > 0:
                reference = source
        observed = add_noise(base, cfg.noise_std, cfg.seed)
        return A, observed, reference

    def build_instance(self, cfg: RunConfig, A: LinearOperator, observed: Grid) -> ImplicitConcaveInstance:
        h, w = observed.shape
        problem = ReconstructionProblem(
            A=A,
            b=observed.data,
            regularizers=make_regularizers(cfg.operator, h, w),
            beta=cfg.beta,
            potential=get_potential(cfg.potential, cfg.log_epsilon),
        )
        return ImplicitConcaveInstance(problem)

    def _metrics(self, outcome_grid: Grid, observed: Grid, reference: Optional[Grid], label: str) -> Dict[str, str]:
        entries: Dict[str, str] = {"reference": label}
        mse, psnr = metrics(outcome_grid, observed)
        entries["mse_vs_observed"] = format_metric(mse)
        entries["psnr_vs_observed"] = format_metric(psnr)
        if reference is not None:
            mse, psnr = metrics(outcome_grid, reference)
            entries["mse_vs_clean"] = format_metric(mse)
            entries["psnr_vs_clean"] = format_metric(psnr)
            mse, psnr = metrics(observed, reference)
            entries["mse_observed_vs_clean"] = format_metric(mse)
            entries["psnr_observed_vs_clean"] = format_metric(psnr)
        return entries

    def run(self, cfg: RunConfig, mode: str) -> ReconstructionOutcome:
        if cfg.input is None:
            raise ConfigError("an input path is required")
        if cfg.output is None:
            raise ConfigError("an output path is required")
        fmt = self.resolve_format(cfg.input, cfg.format)

        source = self.read_grid(cfg.input, fmt)
        clean = self.read_grid(cfg.clean, fmt) if cfg.clean else None
        if clean is not None and clean.shape != source.shape:
            raise ConfigError(f"clean reference is {clean.shape}, input is {source.shape}")

        A, observed, reference = self.observe(cfg, mode, source, clean)
        inst = self.build_instance(cfg, A, observed)
        logger.info(
            f"{mode}: {source.height}x{source.width} grid, potential={cfg.potential}, "
            f"beta={cfg.beta}, noise_std={cfg.noise_std}, seed={cfg.seed}"
        )

        solver = HalfQuadraticSolver(cfg.solver_config())
        try:
            x, _, trace = solver.solve(inst)
            converged = True
        except NotConverged as e:
            if e.trace is None or e.x is None:
                raise
            x, trace, converged = e.x, e.trace, False
            reason = str(e)

        output = observed.with_data(np.asarray(x))
        if cfg.clean:
            label = os.path.basename(cfg.clean)
        elif reference is not None:
            label = "input"
        else:
            label = "none"
        entries = self._metrics(output, observed, reference, label)
        entries["converged"] = "true" if converged else "false"
        entries["iterations"] = str(trace.records[-1].iteration)

        artifacts = RunArtifacts(cfg.output)
        self.write_grid(output, cfg.output, fmt)
        artifacts.write_trace(trace)
        artifacts.write_metrics(entries)
        if converged:
            artifacts.clear_marker()
        else:
            artifacts.mark_not_converged(reason)
        logger.info(f"{mode}: wrote {cfg.output} ({'converged' if converged else 'NOT converged'})")
        return ReconstructionOutcome(output, observed, reference, trace, converged, entries)
