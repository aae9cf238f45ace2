"""Main entry point: python -m zenoifm.main <scenario> [flags]."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from zenoifm.config import LOG_LEVEL
from zenoifm.errors import ZenoIFMError
from zenoifm.runners import RUNNERS
from zenoifm.scenarios import Scenario, resolve_config
from zenoifm.utils import tz_converter

logger = logging.getLogger(__name__)

# Flag destination -> scenario-file key
FLAG_KEYS = {
    "seed": "SEED",
    "out": "OUTPUT_DIR",
    "shots": "SHOTS",
    "omega_hz": "OMEGA_HZ",
    "gamma": "GAMMA",
    "xi": "XI",
    "cutoff": "CUTOFF",
    "sigma_det": "SIGMA_DET",
    "transfer": "TRANSFER",
    "gamma_grid": "GAMMA_GRID",
    "workers": "WORKERS",
    "synthetic_gamma": "SYNTHETIC_GAMMA",
}


def setup_logging(level: str = LOG_LEVEL) -> None:
    """Configure logging with timestamps in the configured timezone."""
    logging.Formatter.converter = staticmethod(tz_converter)
    logging.basicConfig(
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        level=getattr(logging, str(level).upper(), logging.INFO),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zenoifm",
        description="Zeno-suppressed pair creation and interaction-free measurement simulator.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for scenario in Scenario:
        sub = subparsers.add_parser(scenario.command, help=f"run the {scenario.value} scenario")
        sub.add_argument("--config", type=Path, help="scenario file with KEY=value lines")
        sub.add_argument("--seed")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--shots")
        sub.add_argument("--omega-hz", dest="omega_hz", help="pair-creation rate / 2pi")
        sub.add_argument("--gamma", help="loss rate on m=-1 in 1/s")
        sub.add_argument("--xi", help="squeezing parameter; sets t_final = xi / omega")
        sub.add_argument("--cutoff", help="master-equation Fock cutoff")
        sub.add_argument("--sigma-det", dest="sigma_det", help="atom-counting noise in atoms")
        sub.add_argument("--transfer", help="displacement transfer fraction")
        sub.add_argument("--workers", help="worker processes for sweeps and bootstrap")
        if scenario is Scenario.HISTOGRAM:
            sub.add_argument("--with-object", dest="with_object", action="store_true")
        if scenario is Scenario.ZENO_SWEEP:
            sub.add_argument("--gamma-grid", dest="gamma_grid", help='comma-separated loss rates, e.g. "0,15,59"')
        if scenario is Scenario.CALIBRATE_LOSS:
            sub.add_argument("--synthetic-gamma", dest="synthetic_gamma", help="true loss rate of the synthetic curve in 1/s")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one scenario and return the exit status."""
    args = build_parser().parse_args(argv)
    setup_logging()
    scenario = Scenario.from_command(args.command)
    overrides = {key: getattr(args, dest, None) for dest, key in FLAG_KEYS.items()}

    try:
        config = resolve_config(scenario, args.config, overrides)
        runner = RUNNERS[scenario]
        if scenario is Scenario.HISTOGRAM:
            written = runner(config, object_present=args.with_object)
        else:
            written = runner(config)
    except ZenoIFMError as e:
        logger.error("%s failed: %s", scenario.command, e)
        return 1

    logger.info("%s finished: %d file(s) in %s", scenario.command, len(written), config.output_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
