from argparse import Namespace
from typing import Optional

from src.cli.schemas import RunConfig
from src.services.reconstruction_service import ReconstructionService
from src.services.verification_service import VerificationService
from src.utils.config import settings

# argparse dest -> RunConfig field
RUN_OVERRIDES = {
    "input": "input",
    "output": "output",
    "clean": "clean",
    "potential": "potential",
    "beta": "beta",
    "noise_std": "noise_std",
    "seed": "seed",
    "format": "format",
    "operator": "operator",
    "kernel": "kernel",
    "simulate": "simulate",
    "log_epsilon": "log_epsilon",
    "max_iters": "max_iters",
    "tol_obj": "tol_obj",
    "tol_x": "tol_x",
    "cg_tol": "cg_tol",
    "cg_max_iters": "cg_max_iters",
    "mu": "mu",
    "init_mode": "init_mode",
}


def load_run_config(args: Namespace) -> RunConfig:
    overrides = {field: getattr(args, dest, None) for dest, field in RUN_OVERRIDES.items()}
    return RunConfig.load(args.config, **overrides)


def get_reconstruction_service() -> ReconstructionService:
    return ReconstructionService()


def get_verification_service(seed: Optional[int] = None) -> VerificationService:
    return VerificationService(seed if seed is not None else settings.VERIFY_DEFAULT_SEED)
