from __future__ import annotations

import logging

from pydantic import BaseModel

from gevrey_kam.analysis.arithmetic import DiophantineParams
from gevrey_kam.analysis.fourier import GevreyParams
from gevrey_kam.config import CONFIG_MODELS, DiophantineFields, GevreyFields, ProblemSpec
from gevrey_kam.errors import ConfigError
from gevrey_kam.types import ExperimentState
from gevrey_kam.utils.serialize import provenance

log = logging.getLogger(__name__)


def _dimension(cfg: BaseModel) -> int:
    if isinstance(cfg, ProblemSpec):
        return cfg.dimension
    problems = getattr(cfg, "problems", [])
    return max((p.dimension for p in problems), default=1)


def planner_node(state: ExperimentState) -> ExperimentState:
    cfg = state.config
    expected = CONFIG_MODELS.get(state.command)
    if expected is None or not isinstance(cfg, expected):
        raise ConfigError(f"command '{state.command}' needs a {getattr(expected, '__name__', '?')}")

    if isinstance(cfg, GevreyFields):
        state.results["p0"] = GevreyParams(cfg.nu, cfg.r0)
    if isinstance(cfg, DiophantineFields):
        dioph = DiophantineParams(cfg.gamma, cfg.tau)
        dioph.require_dimension(_dimension(cfg))
        state.results["dioph"] = dioph

    state.notes["provenance"] = provenance(state.command, cfg)
    state.notes["out_dir"] = state.out_dir
    log.info(
        f"Planner: {state.command} config={state.notes['provenance']['config_hash'][:12]} "
        f"seed={cfg.seed} threads={state.threads}"
    )
    for key, value in cfg.model_dump(exclude_defaults=True).items():
        log.info(f"  {key}: {value}")
    return state
