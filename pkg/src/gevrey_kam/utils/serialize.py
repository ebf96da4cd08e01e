from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from gevrey_kam import __version__
from gevrey_kam.config import ExperimentModel, config_hash

CSV_FLOAT = "%.17g"


def provenance(command: str, cfg: ExperimentModel) -> dict[str, Any]:
    return {
        "command": command,
        "config_hash": config_hash(cfg),
        "version": __version__,
        "seed": cfg.seed,
    }


def _float(x: float) -> float | str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become strings, complex numbers [re, im]."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, pd.DataFrame):
        return [to_jsonable(row) for row in value.to_dict(orient="records")]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _float(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        return [_float(value.real), _float(value.imag)]
    return value


def write_json(payload: dict[str, Any], path: str | Path) -> str:
    text = json.dumps(to_jsonable(payload), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")
    return str(path)


def write_csv(frame: pd.DataFrame, path: str | Path, header: dict[str, Any]) -> str:
    """Table with a leading `# key=value ...` provenance line (read back with comment="#")."""
    stamp = " ".join(f"{k}={header[k]}" for k in sorted(header))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {stamp}\n")
        frame.to_csv(fh, index=False, float_format=CSV_FLOAT, lineterminator="\n")
    return str(path)
