from __future__ import annotations

import logging
from collections import Counter

import pandas as pd
from joblib import Parallel, delayed

from gevrey_kam.config import GapsConfig
from gevrey_kam.spectral.gaps import GapRecord
from gevrey_kam.spectral.moser_poschel import EdgeVerdict, gap_edge_openness
from gevrey_kam.types import ExperimentState

log = logging.getLogger(__name__)

EDGE_COLUMNS = [
    "k", "E", "verdict", "reason", "c", "chi", "delta1", "R", "D_R", "Z_norm", "d_delta1",
    "rho_lower",
]


def edges_node(state: ExperimentState) -> ExperimentState:
    """Moser-Poschel openness at the upper edge of every detected gap."""
    cfg = state.config
    assert isinstance(cfg, GapsConfig)
    prob = state.results["problem"]
    dioph = state.results["dioph"]
    gaps: list[GapRecord] = state.results["gaps"].gaps

    def judge(gap: GapRecord) -> EdgeVerdict:
        return gap_edge_openness(
            prob,
            gap,
            cfg.r,
            dioph,
            cfg.chi_kappa,
            cfg.edge_R,
            cfg.kam,
            cfg.rotation,
            cfg.uh,
            cfg.scan.label_tol,
            cfg.seed,
        )

    verdicts = Parallel(n_jobs=max(1, state.threads), prefer="threads")(
        delayed(judge)(g) for g in gaps
    )

    state.results["edges"] = verdicts
    state.emit_csv("edges.csv", pd.DataFrame([v.to_row() for v in verdicts], columns=EDGE_COLUMNS))
    counts = Counter(v.verdict for v in verdicts)
    log.info(
        f"MP: {counts['open']} open, {counts['collapsed']} collapsed, "
        f"{counts['inconclusive']} inconclusive"
    )
    return state
