"""
Command-line entry point for mmslam.

Subcommands:
    run      one scenario run (full SLAM or known vehicle), writes steps.csv and summary.json
    compare  all-paths vs specular-only over several seeds, writes comparison.json
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from mmslam import chanmodel, runner
from mmslam.config import ConfigError, ScenarioConfig, default_scenario, load_config, parse_config
from mmslam.likelihood import LIKELIHOOD_MODES
from mmslam.rbpf import FilterDivergenceError
from mmslam.storage import get_storage_client


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DIVERGENCE = 3


def configure_logging(verbose: bool = False) -> None:
    level_name = "DEBUG" if verbose else os.getenv("MMSLAM_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler()
        ]
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmslam",
        description="mmWave multipath SLAM simulator with a PMBM map filter",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python -m mmslam run --config config/scenario.json --known-vehicle
  python -m mmslam run --config config/scenario.json --particles 200 --seed 3 --out-dir results/seed3
  python -m mmslam run --config config/scenario.json --dump-scans scans.jsonl
  python -m mmslam compare --config config/scenario.json --seeds 10 --known-vehicle
        """
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Run one scenario")
    run_parser.add_argument("--config", help="Scenario JSON file (default scenario if omitted)")
    run_parser.add_argument("--seed", type=int, help="Override the configured seed")
    run_parser.add_argument("--mode", choices=LIKELIHOOD_MODES, help="Override the likelihood mode")
    run_parser.add_argument("--particles", type=int, help="Override the particle count")
    run_parser.add_argument("--known-vehicle", action="store_true", help="Feed the true vehicle state to the filter")
    run_parser.add_argument("--out-dir", help="Output directory (default: LOCAL_STORAGE_PATH or ./results)")
    run_parser.add_argument("--dump-scans", help="Write the generated scans to this JSON-lines file")
    run_parser.add_argument("--replay-scans", help="Read scans from this JSON-lines file instead of generating them")
    run_parser.add_argument("--timing", action="store_true", help="Add a wall_time column to the step CSV")
    run_parser.add_argument("--verbose", action="store_true", help="Debug logging")

    compare_parser = subparsers.add_parser("compare", help="Compare both likelihood modes over several seeds")
    compare_parser.add_argument("--config", help="Scenario JSON file (default scenario if omitted)")
    compare_parser.add_argument("--seeds", type=int, default=10, help="Number of seeds, starting at the configured seed")
    compare_parser.add_argument("--known-vehicle", action="store_true", help="Feed the true vehicle state to the filter")
    compare_parser.add_argument("--particles", type=int, help="Override the particle count")
    compare_parser.add_argument("--from-step", type=int, default=5, help="First step included in the averages")
    compare_parser.add_argument("--out-dir", help="Output directory (default: LOCAL_STORAGE_PATH or ./results)")
    compare_parser.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    """Load the configuration file and apply command-line overrides, re-validating the result."""
    config = load_config(args.config) if args.config else default_scenario()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["likelihood_mode"] = args.mode
    if getattr(args, "particles", None) is not None:
        overrides["particle_count"] = args.particles
    if not overrides:
        return config
    return parse_config({**config.echo(), **overrides})


def command_run(args: argparse.Namespace) -> int:
    config = resolve_config(args)

    replay = None
    if args.replay_scans:
        replay = chanmodel.load_scans(args.replay_scans)
    elif args.dump_scans:
        replay = runner.dump_generated_scans(config, args.dump_scans)

    if args.known_vehicle:
        result = runner.run_known_vehicle(config, replay)
    else:
        result = runner.run(config, replay)

    storage = get_storage_client(args.out_dir)
    stored = runner.write_outputs(result, config, storage, timing=args.timing)
    return EXIT_OK if len(stored) == 2 else 1


def command_compare(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    seeds = [config.seed + i for i in range(args.seeds)]
    comparison = runner.compare_modes(config, seeds, known_vehicle=args.known_vehicle, from_step=args.from_step)
    comparison["config"] = config.echo()

    storage = get_storage_client(args.out_dir)
    stored = storage.store_run_outputs({"comparison.json": json.dumps(comparison, indent=2, sort_keys=True) + "\n"})
    for name, location in stored.items():
        logger.info(f"Wrote {name} to {location}")
    return EXIT_OK if stored else 1


def main(argv: Optional[List[str]] = None) -> int:
    """Main function."""
    # Load environment variables from .env file
    load_dotenv()

    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        if args.command == "run":
            return command_run(args)
        return command_compare(args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG_ERROR
    except FilterDivergenceError as e:
        logger.error(f"Run aborted: {str(e)}")
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
