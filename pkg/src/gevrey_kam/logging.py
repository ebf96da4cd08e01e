from __future__ import annotations

import logging
import warnings

from rich.logging import RichHandler

QUIET = ("joblib",)


def setup_logging(level: str = "INFO", capture_warnings: bool = True) -> None:
    """Rich console logging; numpy/scipy RuntimeWarnings go through the `py.warnings` logger."""
    numeric = getattr(logging, level.upper(), logging.INFO)
    logging.basicConfig(
        level=numeric,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=numeric <= logging.DEBUG)],
        force=True,
    )
    for name in QUIET:
        logging.getLogger(name).setLevel(max(numeric, logging.WARNING))

    logging.captureWarnings(capture_warnings)
    if capture_warnings:
        # one report per call site; weight overflow repeats on every mode
        warnings.filterwarnings("once", category=RuntimeWarning)
