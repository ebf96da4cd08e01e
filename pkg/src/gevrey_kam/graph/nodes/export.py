from __future__ import annotations

import logging
import os

from gevrey_kam.types import ExperimentState
from gevrey_kam.utils.serialize import write_csv, write_json

log = logging.getLogger(__name__)


def export_node(state: ExperimentState) -> ExperimentState:
    os.makedirs(state.out_dir, exist_ok=True)
    prov = state.notes["provenance"]

    paths = []
    for art in state.artifacts:
        path = os.path.join(state.out_dir, art.name)
        if art.kind == "csv":
            assert art.frame is not None
            write_csv(art.frame, path, prov)
            log.info(f"ARTIFACT: Wrote {len(art.frame)} rows to {path}")
        else:
            write_json({**(art.payload or {}), "provenance": prov}, path)
            log.info(f"ARTIFACT: Wrote {path}")
        paths.append(path)

    run_path = os.path.join(state.out_dir, "run.json")
    write_json({"config": state.config.model_dump(mode="json"), "provenance": prov}, run_path)
    paths.append(run_path)

    state.notes["outputs"] = paths
    state.notes["output_path"] = state.out_dir
    log.info(f"Output: {state.out_dir}")
    return state
