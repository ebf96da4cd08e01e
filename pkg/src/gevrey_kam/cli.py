from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from gevrey_kam import __version__
from gevrey_kam.config import CONFIG_MODELS, SETTINGS, load_config
from gevrey_kam.conversational import build_orchestrator
from gevrey_kam.errors import ConfigError, ContractViolation, GevreyKamError
from gevrey_kam.logging import setup_logging
from gevrey_kam.types import ExperimentState

HELP = {
    "reduce": "almost reducibility trace, or the rational/diophantine endgame",
    "gaps": "gap scan with the decay check, optionally Moser-Poschel edge analysis",
    "interval": "interval-spectrum verdict for a separable operator",
    "duality": "dual eigenfunction of the long-range operator with residual and goodness",
    "thickness": "thickness of interval unions or middle-thirds sets",
    "sumset": "Minkowski sum of Cantor sets with the gap conditions",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gevrey-kam")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in CONFIG_MODELS:
        cmd = sub.add_parser(name, help=HELP[name])
        cmd.add_argument("--config", help="flat key = value experiment file")
        cmd.add_argument("--out", default=SETTINGS.output_dir)
        cmd.add_argument("--threads", type=int, default=SETTINGS.threads)
        cmd.add_argument(
            "--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"]
        )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    log = logging.getLogger("gevrey_kam")

    try:
        cfg = load_config(args.command, args.config)
        state = ExperimentState(
            command=args.command,
            config=cfg,
            out_dir=args.out,
            threads=max(1, args.threads),
        )
        app = build_orchestrator(args.command)
        final = app.invoke(state)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ContractViolation as e:
        log.warning(f"contract '{e.contract}' violated")
        print(f"contract violated: {e.contract}: {e}", file=sys.stderr)
        return 1
    except GevreyKamError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1

    log.info("Done.")
    log.info(f"Output: {final.notes.get('output_path')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
