from __future__ import annotations

import logging

import pandas as pd

from gevrey_kam.cantor.pipeline import interval_spectrum_pipeline
from gevrey_kam.config import IntervalConfig
from gevrey_kam.spectral.schrodinger import SchrodingerProblem
from gevrey_kam.types import ExperimentState

log = logging.getLogger(__name__)

RATIO_COLUMNS = ["problem", "k", "length", "bridge_ratio", "lower_bound", "ids_jump"]


def interval_node(state: ExperimentState) -> ExperimentState:
    cfg = state.config
    assert isinstance(cfg, IntervalConfig)
    p0, dioph = state.results["p0"], state.results["dioph"]
    problems = [SchrodingerProblem.from_spec(spec, p0) for spec in cfg.problems]
    report = interval_spectrum_pipeline(
        problems,
        cfg.r,
        dioph,
        cfg.scan,
        cfg.rotation,
        cfg.uh,
        cfg.coarsen,
        cfg.seed,
        state.threads,
    )
    state.results["pipeline"] = report

    frames = [
        a.ratios.assign(problem=i) for i, a in enumerate(report.approximations) if len(a.ratios)
    ]
    ratios = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=RATIO_COLUMNS)
    state.emit_csv("ratios.csv", ratios[RATIO_COLUMNS])
    state.emit_json("interval.json", report.summary())

    verdict = "interval" if report.is_interval else f"{len(report.total)} pieces"
    log.info(f"CANTOR: newhouse {'pass' if report.newhouse.passed else 'fail'}, sum is {verdict}")
    return state
