import argparse
import logging
import sys

from config import APP_CONFIG, get_log_level
from experiment import run


def build_parser():
    parser = argparse.ArgumentParser(prog="ergofix", description=APP_CONFIG["description"])
    parser.add_argument("--version", action="version", version=f"{APP_CONFIG['app_name']} {APP_CONFIG['version']}")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run the experiment(s) described by a JSON config")
    run_parser.add_argument("config", help="Path of the experiment config")
    run_parser.add_argument("--jobs", type=int, default=1, help="Sweep runs executed in parallel")
    run_parser.add_argument("--out", default=None, help="Output directory (overrides ERGOFIX_OUTPUT_DIR)")
    run_parser.add_argument("--seed", type=int, default=None, help="Override the config's seed")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=get_log_level(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if args.jobs < 1:
        parser.error("--jobs must be at least 1")

    return run(args.config, jobs=args.jobs, out=args.out, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
