import logging

from rbm_stationary.commands import add_config_arguments, load_config
from rbm_stationary.exceptions import ConfigError
from rbm_stationary.managers.run_manager import RunManager
from rbm_stationary.problem import validate_spec
from rbm_stationary.reference import resolve_spec

logger = logging.getLogger(__name__)


def parse_alphas(text: str):
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"--alphas must be a comma separated list of numbers, got {text!r}") from e


def register(subparsers) -> None:
    parser = subparsers.add_parser("alpha-sweep", help="Convergence traces for several schedule exponents")
    add_config_arguments(parser)
    parser.add_argument("--alphas", type=str, default=None, help="Comma separated exponents, e.g. 0.1,0.5,0.9")
    parser.set_defaults(handler=run)


def run(args) -> int:
    if args.alphas is not None:
        args.alphas = parse_alphas(args.alphas)
    config = load_config(args)
    spec, _ = resolve_spec(config.spec)
    report = validate_spec(spec)
    if not report.passed:
        logger.error(f"Spec '{spec.label}' is not admissible: {'; '.join(report.reasons)}")
        return 2
    document = RunManager().alpha_sweep(config)
    for row in document["sweep"]:
        print(f"alpha={row['exponent']}: terminal mean={row['terminal_mean']:.6g} "
              f"error={row['terminal_error']}")
    return 0
