import logging

from rbm_stationary.commands import add_config_arguments, load_config
from rbm_stationary.managers.study_manager import StudyManager
from rbm_stationary.problem import validate_spec
from rbm_stationary.reference import resolve_spec

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("clt", help="CLT study of sqrt(Lambda_n) nu_n(A phi) over replications")
    add_config_arguments(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    config = load_config(args)
    spec, _ = resolve_spec(config.spec)
    report = validate_spec(spec)
    if not report.passed:
        logger.error(f"Spec '{spec.label}' is not admissible: {'; '.join(report.reasons)}")
        return 2
    summary = StudyManager().clt(config).summary
    print(f"{summary.label}: regime={summary.regime} skewness={summary.skewness:.4g} "
          f"variance_ratio={summary.variance_ratio:.4g} m_tilde={summary.m_tilde:.4g}")
    return 0
