"""
Subcommands of the `rbm-stationary` CLI. Every module exposes
`register(subparsers)` and `run(args) -> int`.

Config precedence, lowest first: model defaults, environment (RBM_*),
the YAML file given with --config, command-line flags.
"""
from argparse import ArgumentParser

from rbm_stationary.exceptions import ConfigError
from rbm_stationary.models.config import EXAMPLE_NAMES, RunConfig


def add_config_arguments(parser: ArgumentParser) -> None:
    source = parser.add_argument_group("problem source (one of)")
    source.add_argument("--config", type=str, default=None, help="Path to a YAML run configuration")
    source.add_argument("--example", type=str, default=None, choices=EXAMPLE_NAMES,
                        help="Benchmark example, used when no --config is given")
    source.add_argument("--r", type=float, default=None, help="Reflection parameter r of symmetric-8d")
    source.add_argument("--rho", type=float, default=None, help="Correlation rho of symmetric-8d")

    overrides = parser.add_argument_group("overrides of config fields")
    overrides.add_argument("--seed", type=int, default=None)
    overrides.add_argument("--n-steps", dest="n_steps", type=int, default=None)
    overrides.add_argument("--replications", type=int, default=None)
    overrides.add_argument("--threads", type=int, default=None)
    overrides.add_argument("--output-dir", dest="output_dir", type=str, default=None)
    overrides.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=None)
    overrides.add_argument("--exponent", type=float, default=None, help="Schedule exponent alpha")


def load_config(args) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "n_steps": args.n_steps,
        "replications": args.replications,
        "threads": args.threads,
        "output_dir": args.output_dir,
        "checkpoint_every": args.checkpoint_every,
        "alphas": getattr(args, "alphas", None),
    }
    if args.config is not None:
        if args.r is not None or args.rho is not None:
            raise ConfigError("--r and --rho only apply to --example symmetric-8d, "
                              "set r and rho in the spec section of the config file instead")
        config = RunConfig.from_yaml(args.config, overrides)
    elif args.example is not None:
        spec = {"name": args.example}
        if args.r is not None:
            spec["r"] = args.r
        if args.rho is not None:
            spec["rho"] = args.rho
        document = {"spec": spec}
        document.update({key: value for key, value in overrides.items() if value is not None})
        config = RunConfig.parse_obj(document)
    else:
        raise ConfigError("Either --config or --example is required")
    if args.exponent is not None:
        config.schedule.exponent = args.exponent
    return config
