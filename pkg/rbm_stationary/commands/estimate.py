import logging

from rbm_stationary.commands import add_config_arguments, load_config
from rbm_stationary.managers.run_manager import RunManager
from rbm_stationary.problem import validate_spec
from rbm_stationary.reference import resolve_spec

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("estimate", help="Estimate the stationary law, write summary and tables")
    add_config_arguments(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    config = load_config(args)
    spec, _ = resolve_spec(config.spec)
    report = validate_spec(spec)
    if not report.passed:
        logger.error(f"Spec '{spec.label}' is not admissible: {'; '.join(report.reasons)}")
        return 2
    summary = RunManager().estimate(config)
    print(f"{summary.label}: mass={summary.mass!r} mean={summary.mean} "
          f"truncation_rate={summary.truncation_rate:.3e}")
    return 0
