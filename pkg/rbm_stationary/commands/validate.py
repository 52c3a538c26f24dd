"""
validate: stability checks of the problem data, exit code 2 on failure
"""
import json
import logging

from rbm_stationary.commands import add_config_arguments, load_config
from rbm_stationary.problem import validate_spec
from rbm_stationary.reference import resolve_spec

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("validate", help="Check reflection matrix, drift cone and ellipticity")
    add_config_arguments(parser)
    parser.add_argument("--exact", action="store_true",
                        help="Run the exact completely-S test (m <= 12)")
    parser.set_defaults(handler=run)


def run(args) -> int:
    config = load_config(args)
    spec, _ = resolve_spec(config.spec)
    report = validate_spec(spec, exact=args.exact)
    print(json.dumps(report.dict(), indent=2))
    return 0 if report.passed else 2
