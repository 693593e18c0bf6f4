"""
F3 Launcher
===========
Single entry point for the federated feature fusion simulator:
- run:             pre-train clients, share representations once, train and score every variant
- verify:          property suites (cdf, bias, sinkhorn, permutation, gradcheck)
- bench:           ICDF vs Gumbel sampler timing and draw counts
- gen-data:        write a synthetic dataset (binary + CSV)
- export-heatmaps: theta / alignment CSVs from a global model checkpoint

Usage: python run.py <command> [options]
Exit codes: 0 success, 1 property or run failure, 2 usage or config error
"""

import argparse
import os
import signal
import sys

# Add project root to path
PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, PROJECT_ROOT)

from src.cli.commands import CommandRunner  # noqa: E402
from src.cli.suites import SUITES  # noqa: E402
from src.numcore.errors import ConfigError, FormatParseError, FormatVersionError  # noqa: E402
from src.utils.console import log, print_banner, set_verbosity  # noqa: E402

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def build_parser():
    """Argument parser with one subparser per command."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', help='Output directory (overrides the config)')
    common.add_argument('--seed', type=int, help='Run seed (replaces the config seed list)')
    common.add_argument('--threads', type=int, help='Worker threads (overrides the config)')
    common.add_argument('--verbosity', choices=['quiet', 'normal', 'debug'], default='normal',
                        help='Console verbosity (default: normal)')

    parser = argparse.ArgumentParser(
        description="F3 - federated feature fusion simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python run.py run --config configs/quickstart.yaml
  python run.py run --config configs/ablation.yaml --seed 3 --out runs/seed3
  python run.py run --config configs/quickstart.yaml --dry-run
  python run.py verify --suite cdf sinkhorn
  python run.py bench --sizes 100000 1000000
        """
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('run', parents=[common], help='Run an experiment config')
    p.add_argument('--config', required=True, help='YAML or JSON experiment config')
    p.add_argument('--dry-run', action='store_true', help='Validate the config without training')

    p = sub.add_parser('verify', parents=[common], help='Run property suites')
    p.add_argument('--suite', nargs='*', choices=sorted(SUITES), help='Suites to run (default: all)')

    p = sub.add_parser('bench', parents=[common], help='Benchmark the edge samplers')
    p.add_argument('--sizes', type=int, nargs='+', default=[1_000_000], help='Samples per timing')
    p.add_argument('--repeats', type=int, default=3, help='Timings per size, best one kept (default: 3)')

    p = sub.add_parser('gen-data', parents=[common], help='Generate a synthetic dataset')
    p.add_argument('--config', help='Experiment config whose data section is used (default spec otherwise)')
    p.add_argument('--self-test', action='store_true', help='Check that the planted graph is informative')

    p = sub.add_parser('export-heatmaps', parents=[common], help='Export theta / alignment CSVs')
    p.add_argument('--checkpoint', required=True, help='Global model checkpoint (JSON)')
    return parser


def main(argv=None):
    """Main entry point"""
    args = build_parser().parse_args(argv)
    set_verbosity(args.verbosity)

    # Handle Ctrl+C gracefully
    def signal_handler(sig, frame):
        print()
        log("Interrupted, stopping.", "WARNING")
        sys.exit(130)

    signal.signal(signal.SIGINT, signal_handler)

    print_banner()
    runner = CommandRunner()
    try:
        success, message = runner.execute(args.command, args)
    except (ConfigError, FormatParseError, FormatVersionError) as e:
        log(f"{type(e).__name__}: {e}", "ERROR")
        return EXIT_USAGE
    except Exception as e:
        log(f"Fatal error: {e}", "ERROR")
        return EXIT_FAILURE

    if success:
        log(message, "SUCCESS")
        return EXIT_OK
    log(message, "ERROR")
    return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
