#!/usr/bin/env python3
"""
mixdiff experiment runner

Usage:
    python main.py run <config.json> [--out DIR] [--seed N]
"""

import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from mixdiff import __version__
from mixdiff.runner import RunError, run

# Load environment variables
load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.getenv("MIXDIFF_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixdiff",
        description="Pseudospectral experiments for mixed local-nonlocal diffusion with absorption",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="action", required=True)
    run_parser = commands.add_parser("run", help="Run an experiment config")
    run_parser.add_argument("config", help="Path to a JSON experiment config")
    run_parser.add_argument("--out", default=None, help="Output directory (overrides the config and MIXDIFF_OUTPUT_ROOT)")
    run_parser.add_argument("--seed", type=int, default=None, help="Seed for random test fields")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = run(args.config, out=args.out, seed=args.seed)
    except RunError as e:
        logger.error(f"❌ {e}")
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    print(f"✅ {summary.command} run complete: {len(summary.checks)} checks passed, artifacts in {summary.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
