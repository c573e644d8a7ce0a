import os
from enum import Enum
from typing import Dict, List, Literal, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.utils.errors import ConfigError


PotentialId = Literal["exp", "geman-mcclure", "log", "sine"]

TRACE_COLUMNS = ["iter", "f", "L", "grad_inf", "dx", "cg_iters"]


class InitMode(str, Enum):
    FROM_OBSERVATION = "from_observation"
    FROM_ADJOINT = "from_adjoint"
    ZERO = "zero"
    GIVEN = "given"


class SolverConfig(BaseModel):
    """Parameters of the half-quadratic block coordinate descent."""

    model_config = ConfigDict(frozen=True)

    max_outer_iters: int = Field(200, ge=1)
    outer_tol_rel_obj: float = Field(1e-8, gt=0)
    outer_tol_rel_x: float = Field(1e-6, gt=0)
    cg_tol: float = Field(1e-10, gt=0)
    cg_max_iters: Optional[int] = Field(None, ge=1)  # None means 10 * n
    tikhonov_mu: float = Field(0.0, ge=0)
    """Proximal weight: the x-step minimizes L(., sigma) + mu ||x - x_warm||^2, so its normal
    equations are (A^T A + beta sum sigma_i G_i^T G_i + mu I) x = A^T b + mu x_warm and the
    CG residual is checked against that right-hand side."""
    init_mode: Optional[InitMode] = None  # None picks observation/adjoint from A

    def cg_budget(self, n: int) -> int:
        return self.cg_max_iters if self.cg_max_iters is not None else 10 * n


class TraceRecord(BaseModel):
    iteration: int
    f: float
    augmented: float
    grad_inf: float
    dx: float
    cg_iters: int
    # L(x_{k-1}, sigma_k), i.e. right after the sigma half-step
    augmented_after_sigma_step: Optional[float] = None


class SolverTrace(BaseModel):
    records: List[TraceRecord] = Field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def augmented_values(self) -> List[float]:
        return [r.augmented for r in self.records]

    @property
    def f_values(self) -> List[float]:
        return [r.f for r in self.records]

    def max_ascent(self) -> float:
        """Largest increase of L across any half-step (<= 0 for a descent run)."""
        worst = float("-inf")
        for prev, cur in zip(self.records, self.records[1:]):
            mid = cur.augmented_after_sigma_step
            if mid is None:
                worst = max(worst, cur.augmented - prev.augmented)
            else:
                worst = max(worst, mid - prev.augmented, cur.augmented - mid)
        return worst if worst != float("-inf") else 0.0

    def max_sigma_step_gap(self) -> float:
        """max_k |L(x_{k-1}, sigma_k) - f(x_{k-1})|; zero when every sigma-step is exact."""
        gaps = [
            abs(cur.augmented_after_sigma_step - prev.f)
            for prev, cur in zip(self.records, self.records[1:])
            if cur.augmented_after_sigma_step is not None
        ]
        return max(gaps, default=0.0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.iteration, r.f, r.augmented, r.grad_inf, r.dx, r.cg_iters] for r in self.records],
            columns=TRACE_COLUMNS,
        )


class StationarityReport(BaseModel):
    grad_f_inf: float
    grad_x_inf: float
    grad_sigma_inf: float
    value_gap: float
    tolerance: float
    correspondence_ok: bool


class HessianReport(BaseModel):
    min_eig_f: float
    min_eig_L: float
    psd_f: bool
    psd_L: bool
    pd_f: bool
    pd_L: bool
    vgrad_hessian_nonsingular: bool
    # None when the non-singularity precondition fails and no claim is made
    correspondence_holds: Optional[bool] = None


class AssumptionReport(BaseModel):
    potential: str
    nonnegative_with_zero_at_origin: bool
    symmetric: bool
    continuously_differentiable: bool
    nondecreasing_on_positive_axis: bool
    weight_strictly_decreasing: bool
    weight_vanishes_at_infinity: bool
    finite_positive_zero_limit: bool

    @property
    def clauses(self) -> Dict[str, bool]:
        return self.model_dump(exclude={"potential"})

    @property
    def failures(self) -> List[str]:
        return [name for name, ok in self.clauses.items() if not ok]

    @property
    def all_passed(self) -> bool:
        return not self.failures


class PropertyResult(BaseModel):
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""


class SuiteResult(BaseModel):
    suite: str
    properties: List[PropertyResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)


def _parse_kernel(raw: str) -> List[float]:
    try:
        taps = [float(tok) for tok in raw.replace(" ", "").split(",") if tok]
    except ValueError:
        raise ValueError(f"kernel taps must be numbers, got {raw!r}")
    if not taps:
        raise ValueError("kernel needs at least one tap")
    return taps


class RunConfig(BaseSettings):
    """One denoise/deblur run: a flat key=value file plus command-line overrides."""

    model_config = SettingsConfigDict(case_sensitive=False, extra="forbid")

    potential: PotentialId = "exp"
    beta: float = Field(0.5, gt=0)
    operator: Literal["auto", "diff1d", "grad2d"] = "auto"
    kernel: str = "1"
    simulate: bool = False
    noise_std: float = Field(0.0, ge=0)
    seed: int = 0
    format: Optional[Literal["csv", "pgm"]] = None
    input: Optional[str] = None
    output: Optional[str] = None
    clean: Optional[str] = None
    log_epsilon: float = Field(1e-8, gt=0)

    # SolverConfig fields
    max_iters: int = Field(200, ge=1)
    tol_obj: float = Field(1e-8, gt=0)
    tol_x: float = Field(1e-6, gt=0)
    cg_tol: float = Field(1e-10, gt=0)
    cg_max_iters: Optional[int] = Field(None, ge=1)
    mu: float = Field(0.0, ge=0)
    init_mode: Optional[InitMode] = None

    @classmethod
    def settings_customise_sources(
        cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings
    ):
        # command line (init) wins over the file; the environment is ignored
        return (init_settings, dotenv_settings)

    @field_validator("kernel")
    @classmethod
    def validate_kernel(cls, value: str) -> str:
        taps = _parse_kernel(value)
        if len(taps) % 2 == 0:
            raise ValueError(f"kernel must have odd length, got {len(taps)} taps")
        if abs(sum(taps) - 1.0) > 1e-9:
            raise ValueError(f"kernel taps must sum to 1, got {sum(taps)!r}")
        return value

    @property
    def kernel_taps(self) -> List[float]:
        return _parse_kernel(self.kernel)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            max_outer_iters=self.max_iters,
            outer_tol_rel_obj=self.tol_obj,
            outer_tol_rel_x=self.tol_x,
            cg_tol=self.cg_tol,
            cg_max_iters=self.cg_max_iters,
            tikhonov_mu=self.mu,
            init_mode=self.init_mode,
        )

    @classmethod
    def load(cls, config_path: Optional[str] = None, **overrides) -> "RunConfig":
        """Read `config_path` (if any) and apply non-None overrides on top."""
        if config_path is not None and not os.path.isfile(config_path):
            raise ConfigError(f"config file not found: {config_path}")
        overrides = {key: value for key, value in overrides.items() if value is not None}
        try:
            return cls(_env_file=config_path, **overrides)
        except ValidationError as e:
            raise ConfigError(f"invalid run configuration: {e}") from e
