from __future__ import annotations

import hashlib
import json
import os
import re
from pathlib import Path
from typing import Any, Literal

import numpy as np
from dotenv import load_dotenv
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from gevrey_kam.analysis.arithmetic import GOLDEN, SILVER, enumerate_modes, torus_distance
from gevrey_kam.analysis.fourier import MAX_DIMENSION, FourierSeries
from gevrey_kam.errors import ConfigError

load_dotenv()


class Settings(BaseModel):
    # worker pool
    threads: int = int(os.getenv("THREADS", str(os.cpu_count() or 1)))

    # output
    output_dir: str = "outputs"


SETTINGS = Settings()


# shared control blocks


class Controls(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RotationControls(Controls):
    n_iter: int = Field(4000, ge=16)
    n_samples: int = Field(4, ge=1)
    window: Literal["weighted", "flat"] = "weighted"


class UHControls(Controls):
    n_win: int = Field(200, ge=8)
    cone: float = Field(0.1, gt=0)
    growth: float = Field(0.005, gt=0)
    grid: int = Field(64, ge=4)
    retries: int = Field(2, ge=0)


class ScanControls(Controls):
    n_energies: int = Field(1500, ge=16)
    k_max: int = Field(6, ge=1)
    label_tol: float = Field(1e-5, gt=0)
    edge_tol: float = Field(1e-8, gt=0)
    multisection: int = Field(32, ge=2)
    min_run: int = Field(2, ge=1)
    e_margin: float = Field(0.1, ge=0)


class KamControls(Controls):
    max_steps: int = Field(8, ge=0)
    max_modes: int = Field(8, ge=1)
    mode_ceiling: int = Field(48, ge=1)
    eta_prefactor: float = Field(2.0, gt=0)
    eta_exponent: float = Field(1.0 / 9.0, gt=0)
    rotated_eta_exponent: float = Field(1.0 / 3.0, gt=0)
    sigma: float = Field(0.05, gt=0, lt=1)
    gate_constant: float = Field(1e-4, gt=0)
    enforce_gates: bool = True
    decay_exponent: float = Field(1.5, ge=1)
    fit_buffer: int = Field(3, ge=1)
    fp_tol: float = Field(1e-13, gt=0)
    fp_max_iter: int = Field(40, ge=1)
    residual_tol: float = Field(1e-9, gt=0)
    floor_factor: float = Field(16.0, gt=0)
    underflow: float = Field(1e-300, gt=0)
    rational_slack: float = Field(10.0, ge=1)


# experiment schemas

_AMO = re.compile(r"^\s*amo\s*:\s*([-+0-9.eE]+)\s*$")
_CANTOR = re.compile(r"^\s*middle_thirds\s*:\s*(\d+)\s*$")


def parse_alpha(value: Any) -> list[float]:
    if isinstance(value, str):
        key = value.strip().lower()
        if key == "golden":
            return [float(GOLDEN)]
        if key == "silver":
            return [float(SILVER)]
        if key in ("pair", "golden_silver"):
            return [float(GOLDEN), float(SILVER)]
        try:
            return [float(key)]
        except ValueError as e:
            raise ValueError(f"unrecognized frequency '{value}'") from e
    if isinstance(value, (int, float)):
        return [float(value)]
    return [parse_alpha(v)[0] if isinstance(v, str) else float(v) for v in value]


def parse_potential(value: Any, dimension: int) -> list[list[float]]:
    if isinstance(value, str):
        m = _AMO.match(value)
        if not m:
            raise ValueError(f"unrecognized potential '{value}' (use amo:<lambda> or rows)")
        lam = float(m.group(1))
        e1 = [1] + [0] * (dimension - 1)
        return [e1 + [lam, 0.0], [-v for v in e1] + [lam, 0.0]]
    rows = [[float(x) for x in row] for row in value]
    for row in rows:
        if len(row) != dimension + 2:
            raise ValueError(f"potential row {row} needs {dimension} + 2 entries")
    return rows


class ExperimentModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0


class ProblemSpec(ExperimentModel):
    """Frequency and potential of one Schrodinger problem."""

    alpha: list[float]
    potential: list[list[float]] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def _shorthands(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if "alpha" in data:
            data["alpha"] = parse_alpha(data["alpha"])
            if "potential" in data:
                data["potential"] = parse_potential(data["potential"], len(data["alpha"]))
        return data

    @model_validator(mode="after")
    def _irrational(self) -> ProblemSpec:
        d = len(self.alpha)
        if not 1 <= d <= MAX_DIMENSION:
            raise ValueError(f"frequency dimension must be 1..{MAX_DIMENSION}, got {d}")
        modes = enumerate_modes(d, 30)
        near = np.asarray(torus_distance(modes @ np.asarray(self.alpha)))
        if np.min(near) < 1e-9:
            raise ValueError(f"alpha={self.alpha} is rational type, irrational frequency required")
        if self.potential:
            nonconstant = any(any(k != 0 for k in row[:d]) for row in self.potential)
            has_value = any(row[d] != 0 or row[d + 1] != 0 for row in self.potential)
            if has_value and not nonconstant:
                raise ValueError("a constant potential is periodic, not quasi-periodic")
        return self

    @property
    def dimension(self) -> int:
        return len(self.alpha)

    def series(self) -> FourierSeries:
        return FourierSeries.from_rows(self.potential, self.dimension)


class GevreyFields(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nu: float = 0.5
    r0: float = 1.0
    r: float = 0.5

    @model_validator(mode="after")
    def _widths(self) -> Any:
        if not 0.0 < self.nu < 1.0:
            raise ValueError(f"nu must lie in (0, 1), got {self.nu}")
        if not 0.0 < self.r < self.r0:
            raise ValueError(f"need 0 < r < r0, got r={self.r}, r0={self.r0}")
        return self


class DiophantineFields(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(0.2, gt=0, lt=1)
    tau: float = Field(3.5, gt=0)
    scan_radius: int = Field(50, ge=1)


class ReduceConfig(ProblemSpec, GevreyFields, DiophantineFields):
    mode: Literal["almost", "rational", "diophantine"] = "almost"
    energy: float | None = None
    rho: float | None = Field(None, ge=0, le=0.5)
    gap_label: list[int] | None = None
    edge: Literal["lower", "upper"] = "upper"
    kappa: float = Field(1e-3, gt=0)
    dc_tau: float = Field(2.0, gt=0)
    best_effort: bool = False
    kam: KamControls = Field(default_factory=KamControls)
    rotation: RotationControls = Field(default_factory=RotationControls)
    uh: UHControls = Field(default_factory=UHControls)
    scan: ScanControls = Field(default_factory=ScanControls)

    @model_validator(mode="after")
    def _energy_source(self) -> ReduceConfig:
        given = [x is not None for x in (self.energy, self.rho, self.gap_label)]
        if sum(given) != 1:
            raise ValueError("exactly one of energy, rho, gap_label must be set")
        if self.mode == "rational" and self.rho is not None:
            raise ValueError("rational mode takes energy or gap_label, not rho")
        if self.gap_label is not None and len(self.gap_label) != self.dimension:
            raise ValueError("gap_label length must match the frequency dimension")
        if self.tau <= self.dimension:
            raise ValueError(f"tau must exceed the dimension {self.dimension}")
        return self


class GapsConfig(ProblemSpec, GevreyFields, DiophantineFields):
    e_min: float | None = None
    e_max: float | None = None
    edge_analysis: bool = False
    chi_kappa: float = Field(0.1, gt=0, lt=0.25)
    edge_R: float | None = Field(None, gt=0)
    finite_section_size: int = Field(0, ge=0, le=4096)
    phases: int = Field(8, ge=1)
    scan: ScanControls = Field(default_factory=ScanControls)
    uh: UHControls = Field(default_factory=UHControls)
    rotation: RotationControls = Field(default_factory=RotationControls)
    kam: KamControls = Field(default_factory=KamControls)

    @model_validator(mode="after")
    def _range(self) -> GapsConfig:
        if self.e_min is not None and self.e_max is not None and not self.e_min < self.e_max:
            raise ValueError("e_min must be below e_max")
        return self


class IntervalConfig(GevreyFields, DiophantineFields, ExperimentModel):
    problems: list[ProblemSpec] = Field(min_length=2, max_length=MAX_DIMENSION)
    coarsen: float = Field(0.0, ge=0)
    scan: ScanControls = Field(default_factory=ScanControls)
    uh: UHControls = Field(default_factory=UHControls)
    rotation: RotationControls = Field(default_factory=RotationControls)


class DualityConfig(ProblemSpec, GevreyFields, DiophantineFields):
    coupling: float = Field(gt=0)
    energy: float | None = None
    rho: float | None = Field(None, gt=0, lt=0.5)
    m_prime: list[int] | None = None
    kappa: float = Field(1e-3, gt=0)
    dc_tau: float = Field(2.0, gt=0)
    good_N: int = Field(8, ge=1)
    good_C: float | None = Field(None, gt=0)
    good_eps: float = Field(0.1, gt=0, lt=1)
    max_window: int = Field(2_000_000, ge=1)
    census_phases: int = Field(0, ge=0)
    census_box: int = Field(2, ge=0)
    sweep: list[float] = Field(default_factory=list)
    kam: KamControls = Field(default_factory=KamControls)
    rotation: RotationControls = Field(default_factory=RotationControls)

    @model_validator(mode="after")
    def _energy_source(self) -> DualityConfig:
        if (self.energy is None) == (self.rho is None):
            raise ValueError("exactly one of energy, rho must be set")
        if self.m_prime is not None and len(self.m_prime) != self.dimension:
            raise ValueError("m_prime length must match the frequency dimension")
        if any(not c > 0 for c in self.sweep):
            raise ValueError("sweep couplings must be positive")
        return self


CantorSpec = str | list[list[float]]


class CantorFields(ExperimentModel):
    sets: list[CantorSpec] = Field(min_length=1)
    coarsen: float = Field(0.0, ge=0)

    @field_validator("sets")
    @classmethod
    def _sets(cls, sets: list[CantorSpec]) -> list[CantorSpec]:
        for s in sets:
            if isinstance(s, str):
                if not _CANTOR.match(s):
                    raise ValueError(f"unrecognized set '{s}' (use middle_thirds:<level>)")
            elif not s or any(len(pair) != 2 for pair in s):
                raise ValueError(f"set {s} must be a nonempty list of [a, b] pairs")
        return sets


class ThicknessConfig(CantorFields):
    pass


class SumsetConfig(CantorFields):
    sets: list[CantorSpec] = Field(min_length=2)
    cap: int = Field(1_000_000, ge=1)


CONFIG_MODELS: dict[str, type[ExperimentModel]] = {
    "reduce": ReduceConfig,
    "gaps": GapsConfig,
    "interval": IntervalConfig,
    "duality": DualityConfig,
    "thickness": ThicknessConfig,
    "sumset": SumsetConfig,
}


def cantor_level(spec: str) -> int:
    m = _CANTOR.match(spec)
    if not m:
        raise ConfigError(f"unrecognized set '{spec}'")
    return int(m.group(1))


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Flat `key = value` lines; `#` starts a comment; values are JSON when they parse."""
    raw: dict[str, Any] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or key in raw:
            raise ConfigError(f"{path}:{lineno}: empty or duplicate key '{key}'")
        try:
            raw[key] = json.loads(value)
        except json.JSONDecodeError:
            raw[key] = value
    return raw


def load_config(command: str, path: str | Path | None) -> ExperimentModel:
    if command not in CONFIG_MODELS:
        raise ConfigError(f"unknown command '{command}'")
    raw = read_config_file(path) if path else {}
    return validate_config(command, raw)


def validate_config(command: str, raw: dict[str, Any]) -> ExperimentModel:
    try:
        return CONFIG_MODELS[command].model_validate(raw)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def config_hash(cfg: BaseModel) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
