import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from src.cli import commands
from src.cli.dependencies import load_run_config
from src.cli.schemas import InitMode
from src.services.verification_service import SUITES
from src.utils.config import settings, setup_logging
from src.utils.errors import (
    ConfigError,
    DimensionError,
    DomainError,
    FormatError,
    GridIOError,
    NotConverged,
    NumericalError,
)

logger = logging.getLogger(__name__)

POTENTIAL_IDS = ["exp", "geman-mcclure", "log", "sine"]


def _bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    # defaults stay None so the config file can supply them
    parser.add_argument("--config", help="key=value run configuration file")
    parser.add_argument("--input", help="input grid (.csv or .pgm)")
    parser.add_argument("--output", help="reconstructed grid, same format as the input")
    parser.add_argument("--clean", help="clean reference grid for metrics")
    parser.add_argument("--potential", choices=POTENTIAL_IDS)
    parser.add_argument("--beta", type=float, help="regularization weight (> 0)")
    parser.add_argument("--noise-std", dest="noise_std", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--format", choices=["csv", "pgm"])
    parser.add_argument("--operator", choices=["auto", "diff1d", "grad2d"])
    parser.add_argument("--log-epsilon", dest="log_epsilon", type=float)
    parser.add_argument("--max-iters", dest="max_iters", type=int)
    parser.add_argument("--tol-obj", dest="tol_obj", type=float)
    parser.add_argument("--tol-x", dest="tol_x", type=float)
    parser.add_argument("--cg-tol", dest="cg_tol", type=float)
    parser.add_argument("--cg-max-iters", dest="cg_max_iters", type=int)
    parser.add_argument("--mu", type=float, help="proximal weight of the x-step")
    parser.add_argument("--init-mode", dest="init_mode", choices=[m.value for m in InitMode if m != InitMode.GIVEN])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.PROJECT_NAME,
        description="Half-quadratic edge-preserving denoising and deblurring.",
    )
    parser.add_argument("--log-level", dest="log_level", help="override HQR_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    denoise = sub.add_parser("denoise", help="denoise a signal or image (A = identity)")
    _add_run_arguments(denoise)

    deblur = sub.add_parser("deblur", help="deblur with a separable kernel")
    _add_run_arguments(deblur)
    deblur.add_argument("--kernel", help="comma-separated odd-length taps summing to 1")
    deblur.add_argument(
        "--simulate",
        type=_bool,
        nargs="?",
        const=True,
        help="blur (and add noise to) the input first; the input becomes the clean reference",
    )

    verify = sub.add_parser("verify", help="run the numerical property suites")
    verify.add_argument("suite", nargs="?", default="all", choices=list(SUITES) + ["all"])
    verify.add_argument("--seed", type=int)

    conj = sub.add_parser("conjugate-check", help="alias for 'verify conjugate'")
    conj.add_argument("--seed", type=int)
    return parser


def run(args: argparse.Namespace) -> int:
    if args.command == "verify":
        return commands.cmd_verify(args.suite, args.seed)
    if args.command == "conjugate-check":
        return commands.cmd_conjugate_check(args.seed)

    cfg = load_run_config(args)
    if args.command == "denoise":
        return commands.cmd_denoise(cfg)
    return commands.cmd_deblur(cfg)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(level=args.log_level)
    logger.info(f"{settings.PROJECT_NAME} {args.command} started")

    try:
        status = run(args)
    except (ConfigError, DomainError, DimensionError, ValidationError) as e:
        logger.error(f"configuration error: {e}")
        return commands.EXIT_CONFIG
    except (GridIOError, FormatError) as e:
        logger.error(f"I/O error: {e}")
        return commands.EXIT_IO
    except NotConverged as e:
        logger.error(f"not converged: {e}")
        return commands.EXIT_NOT_CONVERGED
    except NumericalError as e:
        logger.error(f"numerical error: {e}")
        return commands.EXIT_NUMERICAL

    logger.info(f"{settings.PROJECT_NAME} {args.command} finished with status {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
