import logging
import sys
from typing import List, Optional, TextIO

from src.cli.dependencies import get_reconstruction_service, get_verification_service
from src.cli.schemas import RunConfig, SuiteResult
from src.services.reconstruction_service import DEBLUR, DENOISE

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NOT_CONVERGED = 4
EXIT_NUMERICAL = 5
EXIT_VERIFY_FAILED = 1


def _reconstruct(cfg: RunConfig, mode: str) -> int:
    outcome = get_reconstruction_service().run(cfg, mode)
    if not outcome.converged:
        logger.error(f"{mode}: solver did not converge; outputs written with a not_converged marker")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_denoise(cfg: RunConfig) -> int:
    return _reconstruct(cfg, DENOISE)


def cmd_deblur(cfg: RunConfig) -> int:
    return _reconstruct(cfg, DEBLUR)


def print_report(results: List[SuiteResult], stream: TextIO) -> None:
    """Human-readable lines first, then machine-readable key=value lines."""
    for suite in results:
        stream.write(f"== {suite.suite}: {'PASS' if suite.passed else 'FAIL'}\n")
        for prop in suite.properties:
            status = "PASS" if prop.passed else "FAIL"
            line = f"  [{status}] {prop.name}: worst={prop.worst:.3e} tol={prop.tolerance:.1e}"
            if prop.detail:
                line += f" ({prop.detail})"
            stream.write(line + "\n")
    for suite in results:
        for prop in suite.properties:
            stream.write(f"{suite.suite}.{prop.name}.passed={str(prop.passed).lower()}\n")
            stream.write(f"{suite.suite}.{prop.name}.worst={prop.worst!r}\n")
        stream.write(f"{suite.suite}.passed={str(suite.passed).lower()}\n")
    stream.write(f"all.passed={str(all(s.passed for s in results)).lower()}\n")


def cmd_verify(suite: str, seed: Optional[int] = None, stream: Optional[TextIO] = None) -> int:
    service = get_verification_service(seed)
    results = service.run(suite)
    print_report(results, stream or sys.stdout)
    passed = all(r.passed for r in results)
    if not passed:
        failing = [f"{s.suite}.{p.name}" for s in results for p in s.properties if not p.passed]
        logger.error(f"verify {suite}: failing properties: {', '.join(failing)}")
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


def cmd_conjugate_check(seed: Optional[int] = None, stream: Optional[TextIO] = None) -> int:
    return cmd_verify("conjugate", seed, stream)
