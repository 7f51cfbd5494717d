#!/usr/bin/env python3
"""
HUS Relay Main Entry Point

Subcommands:
- run:         Monte Carlo sweep of the configured strategies
- compare:     the same sweep over the comparator set, plus the delay study
- table:       build and persist the Markov lookup table
- convergence: embedded-solver iteration traces
"""

import sys
import argparse
import logging
from pathlib import Path
from typing import List, Optional

from husrelay.core.config import ExperimentConfig, get_default_config
from husrelay.core.errors import HusRelayError

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(output_dir: str, verbose: bool = False) -> None:
    """Console plus a log file in the output directory"""
    Path(output_dir).mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(str(Path(output_dir) / 'husrelay.log'), encoding='utf-8'),
            logging.StreamHandler()
        ],
        force=True,
    )


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (or defaults) with command-line overrides applied"""
    if args.config:
        config = ExperimentConfig.load_from_file(args.config)
    else:
        config = get_default_config()

    ex = config.experiment
    if args.seed is not None:
        ex.master_seed = args.seed
    if args.trials is not None:
        ex.trials = args.trials
    if args.out is not None:
        ex.output_dir = args.out
    if args.workers is not None:
        ex.workers = args.workers
    if getattr(args, 'strategies', None):
        ex.strategies = [s.strip() for s in args.strategies.split(',') if s.strip()]

    return config.validate()


def run_sweep(config: ExperimentConfig, strategies: Optional[List[str]] = None,
              with_delay: bool = False, tables: Optional[List[str]] = None) -> List[str]:
    """Run the sweep and write CSV and JSON summary"""
    from husrelay.engine import ExperimentEngine
    from husrelay.reporting.reporter import ResultWriter

    engine = ExperimentEngine(config)
    if tables:
        engine.load_tables(tables)
    rows = engine.run(strategies)

    writer = ResultWriter(config.experiment.output_dir)
    written = [
        writer.write_csv(rows, include_wall_time=config.experiment.record_wall_time),
        writer.write_summary(rows, metadata={
            "master_seed": config.experiment.master_seed,
            "trials": config.experiment.trials,
            "snr_db": engine.snr_points,
        }),
    ]
    if with_delay:
        written.append(writer.write_json(engine.delay_study(), 'delay.json'))

    engine.print_summary(rows)
    return written


def run_table(config: ExperimentConfig, snr_db: Optional[float]) -> str:
    """Build and persist the lookup table for one SNR"""
    from husrelay.engine import ExperimentEngine
    from husrelay.core.performance import TimerContext

    engine = ExperimentEngine(config)
    snr = snr_db if snr_db is not None else engine.snr_points[0]

    with TimerContext(engine.counter, "table") as timer:
        table = engine.build_table(snr)

    out_dir = Path(config.experiment.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"policy_table_{snr:g}dB.json"
    table.save(str(path))

    print(f"Entries: {table.entry_count}")
    print(f"Build time: {timer.elapsed_seconds:.2f}s")
    print(f"Embedded evaluations: {engine.counter.count('embedded_evaluations')}")
    print(f"Saved to: {path}")
    print(engine.counter.print_report())
    return str(path)


def run_convergence(config: ExperimentConfig, instances: Optional[int], snr_db: float) -> str:
    """Write embedded-solver iteration traces"""
    from husrelay.engine import ExperimentEngine
    from husrelay.reporting.reporter import ResultWriter

    engine = ExperimentEngine(config)
    records = engine.convergence(instances, snr_db)
    return ResultWriter(config.experiment.output_dir).write_convergence(records)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='husrelay',
        description='Harvest-use-store power splitting relay simulator',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
USAGE EXAMPLES:
  # Default sweep (optimal, markov, greedy)
  %(prog)s run --config config/husrelay.json

  # Quick single-strategy run
  %(prog)s run --strategies greedy --trials 1 --out /tmp/hr

  # Comparator set plus delay study
  %(prog)s compare --trials 50

  # Persist a lookup table for 10 dB, then reuse it
  %(prog)s table --snr 10
  %(prog)s run --strategies markov --table results/policy_table_10dB.json

  # Solver convergence traces
  %(prog)s convergence --instances 1000
        '''
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', help='JSON experiment configuration')
    common.add_argument('--seed', type=int, help='Master seed override')
    common.add_argument('--trials', type=int, help='Trials per (strategy, SNR) cell')
    common.add_argument('--out', help='Output directory')
    common.add_argument('--workers', type=int, help='Worker processes')
    common.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')

    sub = parser.add_subparsers(dest='command', required=True)

    run_p = sub.add_parser('run', parents=[common], help='Monte Carlo sweep')
    run_p.add_argument('--strategies', help='Comma-separated strategy tags')
    run_p.add_argument('--table', action='append', metavar='PATH',
                       help='Persisted lookup table to reuse for the markov strategy (repeatable)')

    sub.add_parser('compare', parents=[common], help='Comparator sweep and delay study')

    table_p = sub.add_parser('table', parents=[common], help='Build the Markov lookup table')
    table_p.add_argument('--snr', type=float, help='SNR in dB (default: first sweep point)')

    conv_p = sub.add_parser('convergence', parents=[common], help='Embedded solver traces')
    conv_p.add_argument('--instances', type=int, help='Random instances')
    conv_p.add_argument('--snr', type=float, default=10.0, help='SNR in dB')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config(args)
        setup_logging(config.experiment.output_dir, args.verbose)

        if args.command == 'run':
            run_sweep(config, tables=args.table)
        elif args.command == 'compare':
            from husrelay.comparators.baselines import COMPARATOR_STRATEGIES
            run_sweep(config, [s.value for s in COMPARATOR_STRATEGIES], with_delay=True)
        elif args.command == 'table':
            run_table(config, args.snr)
        elif args.command == 'convergence':
            run_convergence(config, args.instances, args.snr)
        return 0

    except HusRelayError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"ERROR: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return 1


if __name__ == '__main__':
    sys.exit(main())
