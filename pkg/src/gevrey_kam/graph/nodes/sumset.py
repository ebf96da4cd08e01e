from __future__ import annotations

import logging

import pandas as pd

from gevrey_kam.cantor.intervals import coarsen, from_spec, newhouse_check, sumset
from gevrey_kam.config import SumsetConfig
from gevrey_kam.errors import check_contract
from gevrey_kam.types import ExperimentState

log = logging.getLogger(__name__)


def sumset_node(state: ExperimentState) -> ExperimentState:
    cfg = state.config
    assert isinstance(cfg, SumsetConfig)
    sets = [coarsen(from_spec(spec), cfg.coarsen) for spec in cfg.sets]
    report = newhouse_check(sets)
    total = sumset(sets, cfg.cap)
    if report.passed:
        check_contract("gap conditions imply an interval sum", float(len(total) - 1), 0.0)
    state.results["sumset"] = total
    state.results["newhouse"] = report
    log.info(f"CANTOR: sum of {len(sets)} sets has {len(total)} components")

    state.emit_csv("sumset.csv", pd.DataFrame(total.to_pairs(), columns=["a", "b"]))
    state.emit_json(
        "sumset.json",
        {
            "coarsen": cfg.coarsen,
            "newhouse": report.to_dict(),
            "components": len(total),
            "hull": list(total.hull),
            "is_interval": total.is_interval(),
        },
    )
    return state
