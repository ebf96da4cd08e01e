from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal

import pandas as pd

from gevrey_kam.config import ExperimentModel

CommandName = Literal["reduce", "gaps", "interval", "duality", "thickness", "sumset"]
ArtifactKind = Literal["csv", "json"]


@dataclass
class Artifact:
    """One output file; CSV artifacts carry a frame, JSON artifacts a payload."""

    name: str
    kind: ArtifactKind
    frame: pd.DataFrame | None = None
    payload: dict[str, Any] | None = None


@dataclass
class ExperimentState:
    command: CommandName
    config: ExperimentModel
    out_dir: str
    threads: int = 1

    # pipeline data
    results: dict[str, Any] = field(default_factory=dict)
    artifacts: list[Artifact] = field(default_factory=list)

    notes: dict = field(default_factory=dict)

    def emit_csv(self, name: str, frame: pd.DataFrame) -> None:
        self.artifacts.append(Artifact(name, "csv", frame=frame))

    def emit_json(self, name: str, payload: dict[str, Any]) -> None:
        self.artifacts.append(Artifact(name, "json", payload=payload))
