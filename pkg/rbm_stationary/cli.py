"""
Batch front-end: `rbm-stationary <command> [options]`.

Exit codes: 0 success, 2 validation failure, 3 runtime numerical failure,
4 config error or bad command-line usage.
"""
from argparse import ArgumentParser
from typing import List, NoReturn, Optional
import logging
import sys

from pydantic import ValidationError
import yaml

from rbm_stationary import __version__
from rbm_stationary.commands import alpha_sweep, clt, estimate, resume, validate
from rbm_stationary.exceptions import ConfigError, RbmError
from rbm_stationary.utils import safe_init_logging

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_CONFIG = 4

logger = logging.getLogger(__name__)


class CliParser(ArgumentParser):
    """
    Usage errors exit with EXIT_CONFIG; argparse would use 2, the code of a
    failed validation.
    """

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> ArgumentParser:
    parser = CliParser(
        prog="rbm-stationary",
        description="Stationary distributions of reflected diffusions in the orthant",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", dest="log_level", type=str, default=None,
                        help="Overrides RBM_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    validate.register(subparsers)
    estimate.register(subparsers)
    alpha_sweep.register(subparsers)
    clt.register(subparsers)
    resume.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    safe_init_logging(args.log_level)
    try:
        return args.handler(args)
    except (ConfigError, ValidationError, yaml.YAMLError, FileNotFoundError) as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except RbmError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return EXIT_RUNTIME
