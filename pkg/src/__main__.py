"""
Main entry point for the coded MapReduce simulator.
Provides the command-line interface and maps failures to exit codes.
"""

import sys
import argparse
from typing import List, Optional

from src.config.settings import settings
from src.core.bounds import bounds_table, rows_to_csv
from src.core.engine import LoadReport, ShuffleStrategy
from src.services.experiments import (
    MODES,
    RANDOM_PLACEMENT_COLUMNS,
    ExperimentConfig,
    random_placement_experiment,
    replay_example1,
    replay_example2,
    replay_examples,
    run_sweep,
    sweep_csv,
)
from src.services.sortapp import SortJobConfig, run_coded_sort
from src.utils.logger import get_logger, set_level

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INVARIANT = 2

EPILOG = """\
CSV columns:
  sweep             s, r, l_uncoded, l_coded, l_measured, l_measured_padded,
                    l_uncoded_measured, lemma_bound
  sort              strategy, K, r, s, Q, N, T, total_bits, load_num, load_den
                    (one row per strategy)
  random-placement  r, s, l_canonical, coded_mean, coded_min, coded_max,
                    uncoded_mean, bound_min, violations
  bounds            r, l_uncoded, l_coded, lemma_bound
Rationals are written exactly as p/q. Exit codes: 0 success, 1 invalid
configuration, 2 invariant violation.
"""


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse command line arguments.

    Returns:
        argparse.Namespace: Parsed command line arguments
    """
    parser = argparse.ArgumentParser(
        description="Coded distributed computing simulator: load sweeps, worked examples and CodedTeraSort",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    parser.add_argument("mode", choices=MODES, help="Experiment to run")
    parser.add_argument("-c", "--config", help="key=value file with experiment parameters")
    parser.add_argument("-K", type=int, dest="K", help="Number of nodes")
    parser.add_argument("-r", dest="r", help="Computation load(s): '3', '1-10' or '1,1.5,2'")
    parser.add_argument("-s", dest="s", help="Reduce replication(s): '1' or '1-10'")
    parser.add_argument("-Q", type=int, dest="Q", help="Number of output functions")
    parser.add_argument("-N", type=int, dest="N", help="Number of input files")
    parser.add_argument("-T", type=int, dest="T", help="Bits per intermediate value")
    parser.add_argument("--seed", type=int, help="Base random seed")
    parser.add_argument("--seeds", type=int, help="Random placements per point")
    parser.add_argument("--records", type=int, help="Records to sort")
    parser.add_argument("--key-bytes", type=int, dest="key_bytes", help="Sort key width")
    parser.add_argument("--value-bytes", type=int, dest="value_bytes", help="Sort value width")
    parser.add_argument(
        "--strategy",
        choices=[strategy.value for strategy in ShuffleStrategy],
        help="Shuffle whose output the sort emits (default: coded)",
    )
    parser.add_argument("-w", "--workers", type=int, help="Worker threads")
    parser.add_argument("-o", "--output", help="CSV output path (default: stdout)")
    parser.add_argument("--sorted-output", help="Write the sorted records here (sort mode)")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=settings.logging.LEVEL.upper(),
        help="Logging level",
    )
    parser.add_argument("--no-progress", action="store_true", help="Disable progress bars")

    return parser.parse_args(argv)


def update_settings(args: argparse.Namespace) -> None:
    """
    Update settings based on command line arguments.

    Args:
        args: Parsed command line arguments
    """
    set_level(args.log_level)
    if args.no_progress:
        settings.output.PROGRESS = False
    if args.workers is not None:
        settings.engine.WORKERS = args.workers


def emit(config: ExperimentConfig, body: str) -> None:
    text = config.header() + body
    if config.output:
        with open(config.output, "w") as handle:
            handle.write(text)
        logger.info(f"Wrote {config.output}")
    else:
        sys.stdout.write(text)


def run_mode(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """
    Execute one experiment mode.

    Returns:
        int: Exit code
    """
    if config.mode == "sweep":
        emit(config, sweep_csv(run_sweep(config)))
        return EXIT_OK

    if config.mode in ("example1", "example2", "examples"):
        runners = {
            "example1": lambda: [replay_example1()],
            "example2": lambda: [replay_example2()],
            "examples": replay_examples,
        }
        results = runners[config.mode]()
        emit(config, rows_to_csv(
            ("name", "passed", "messages", "load", "log_bytes"),
            [(r.name, r.passed, r.message_count, r.load, len(r.log)) for r in results],
        ))
        return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT

    if config.mode == "sort":
        r_values = config.r_values
        result = run_coded_sort(SortJobConfig(
            K=config.K,
            r=int(r_values[0]),
            records=config.records,
            key_bytes=config.key_bytes,
            value_bytes=config.value_bytes,
            seed=config.seed,
            strategy=ShuffleStrategy(config.strategy),
            workers=config.workers,
        ))
        if args.sorted_output:
            with open(args.sorted_output, "wb") as handle:
                handle.write(result.output)
        emit(config, rows_to_csv(
            LoadReport.CSV_COLUMNS, [result.coded.csv_row(), result.uncoded.csv_row()]
        ))
        return EXIT_OK if result.verified else EXIT_INVARIANT

    if config.mode == "random-placement":
        emit(config, rows_to_csv(RANDOM_PLACEMENT_COLUMNS, random_placement_experiment(config)))
        return EXIT_OK

    rows = []
    for s in config.s_values:
        rows.extend(bounds_table(config.K, s, config.r_values, config.N))
    emit(config, rows_to_csv(("r", "l_uncoded", "l_coded", "lemma_bound"), rows))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main program entry point.

    Returns:
        int: Exit code (0 success, 1 invalid configuration, 2 invariant violation)
    """
    try:
        args = parse_arguments(argv)
        update_settings(args)
        overrides = {
            name: getattr(args, name)
            for name in ("mode", "K", "r", "s", "Q", "N", "T", "seed", "seeds", "records",
                         "key_bytes", "value_bytes", "strategy", "workers", "output")
        }
        config = ExperimentConfig.load(args.config, overrides)
        return run_mode(config, args)

    except ValueError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return EXIT_INVALID
    except RuntimeError as e:
        logger.error(f"Invariant violation: {str(e)}")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
