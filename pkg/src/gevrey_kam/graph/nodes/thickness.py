from __future__ import annotations

import logging

from gevrey_kam.cantor.intervals import coarsen, diameter, from_spec, gamma, thickness
from gevrey_kam.config import ThicknessConfig
from gevrey_kam.types import ExperimentState

log = logging.getLogger(__name__)


def thickness_node(state: ExperimentState) -> ExperimentState:
    cfg = state.config
    assert isinstance(cfg, ThicknessConfig)
    rows = []
    for i, spec in enumerate(cfg.sets):
        K = coarsen(from_spec(spec), cfg.coarsen)
        report = thickness(K)
        rows.append(
            {
                "index": i,
                "components": len(K),
                "hull": list(K.hull),
                "gamma": gamma(K),
                "diameter": diameter(K),
                "thickness": report.to_dict(),
            }
        )
        log.info(f"CANTOR: set {i} has {len(K)} components, tau={report.to_dict()['tau']}")
    state.results["thickness"] = rows
    state.emit_json("thickness.json", {"coarsen": cfg.coarsen, "sets": rows})
    return state
