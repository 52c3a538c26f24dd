from rbm_stationary.managers.run_manager import RunManager


def register(subparsers) -> None:
    parser = subparsers.add_parser("resume", help="Continue a replication from its checkpoint")
    parser.add_argument("--checkpoint", type=str, required=True, help="Checkpoint file rep<NNN>_k<k>.json")
    parser.add_argument("--n-steps", dest="n_steps", type=int, default=None,
                        help="Total steps to reach, the checkpoint's config value if not set")
    parser.set_defaults(handler=run)


def run(args) -> int:
    summary = RunManager().resume(args.checkpoint, args.n_steps)
    print(f"replication {summary.replication}: k={summary.n_steps} mean={summary.mean}")
    return 0
