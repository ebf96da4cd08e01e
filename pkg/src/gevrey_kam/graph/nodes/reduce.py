from __future__ import annotations

import logging
from typing import Any

from gevrey_kam.config import ReduceConfig
from gevrey_kam.duality.eigenfunctions import energy_for_rotation
from gevrey_kam.errors import ConfigError, RotationMismatchError
from gevrey_kam.kam.endgames import reduce_diophantine, reduce_rational
from gevrey_kam.kam.iteration import almost_reduce
from gevrey_kam.spectral.gaps import find_gaps, gap_label
from gevrey_kam.spectral.schrodinger import (
    SchrodingerProblem,
    schrodinger_cocycle,
    schrodinger_rotation,
)
from gevrey_kam.types import ExperimentState

log = logging.getLogger(__name__)


def _gap_edge(prob: SchrodingerProblem, cfg: ReduceConfig, threads: int) -> float:
    label = tuple(cfg.gap_label or ())
    scan = find_gaps(prob, None, cfg.scan, cfg.rotation, cfg.uh, cfg.seed, threads)
    for g in scan.gaps:
        if g.k == label:
            return g.E_plus if cfg.edge == "upper" else g.E_minus
    raise ConfigError(f"no open gap carries label {list(label)}")


def _energy(prob: SchrodingerProblem, cfg: ReduceConfig, threads: int) -> float:
    if cfg.energy is not None:
        return cfg.energy
    if cfg.rho is not None:
        return energy_for_rotation(prob, cfg.rho, cfg.rotation, cfg.seed)
    return _gap_edge(prob, cfg, threads)


def _label(prob: SchrodingerProblem, cfg: ReduceConfig, energy: float) -> tuple[int, ...]:
    if cfg.gap_label is not None:
        return tuple(cfg.gap_label)
    est = schrodinger_rotation(prob, [energy], cfg.rotation, cfg.seed)[0]
    k = gap_label(est.value, prob.alpha, cfg.scan.k_max, cfg.scan.label_tol)
    if k is None:
        raise RotationMismatchError(
            f"rho = {est.value:.10g} at E={energy:.10g} carries no label "
            f"with |k|_1 <= {cfg.scan.k_max}"
        )
    return k


def reduce_node(state: ExperimentState) -> ExperimentState:
    cfg = state.config
    assert isinstance(cfg, ReduceConfig)
    p0, dioph = state.results["p0"], state.results["dioph"]
    prob = SchrodingerProblem.from_spec(cfg, p0)
    energy = _energy(prob, cfg, state.threads)
    cocycle = schrodinger_cocycle(prob, energy)
    assert cocycle.A0 is not None and cocycle.f is not None
    A0, f0, alpha = cocycle.A0, cocycle.f, prob.alpha
    log.info(f"REDUCE: mode={cfg.mode} E={energy:.12g} |f0|={f0.gevrey_norm(p0):.3e}")

    extra: dict[str, Any] = {}
    if cfg.mode == "almost":
        trace = almost_reduce(A0, f0, alpha, p0, cfg.r, dioph, cfg.kam, cfg.best_effort, cfg.seed)
        extra["decay_holds"] = trace.decay_holds(cfg.kam)
    elif cfg.mode == "rational":
        k = _label(prob, cfg, energy)
        rat = reduce_rational(
            A0,
            f0,
            alpha,
            k,
            p0,
            cfg.r,
            dioph,
            cfg.kam,
            cfg.rotation,
            cfg.uh,
            cfg.scan.label_tol,
            cfg.seed,
        )
        trace = rat.trace
        extra = {
            "label": list(k),
            "phi": rat.phi,
            "phi_bound": rat.phi_bound,
            "defect": rat.defect,
            "sign": rat.sign,
            "rho": rat.rho,
            "residual": rat.residual,
            "A_final": rat.A_final,
        }
    else:
        dio = reduce_diophantine(
            A0,
            f0,
            alpha,
            p0,
            cfg.r,
            dioph,
            cfg.kappa,
            cfg.dc_tau,
            cfg.kam,
            cfg.rotation,
            cfg.scan_radius,
            cfg.seed,
        )
        trace = dio.trace
        extra = {
            "rho": dio.rho,
            "rho_final": dio.rho_final,
            "last_resonant_step": dio.last_resonant_step,
            "tail_deviation": dio.tail_deviation,
            "tail_bound": dio.tail_bound,
            "residual": dio.residual,
        }

    state.results["trace"] = trace
    state.emit_csv("trace.csv", trace.to_frame())
    state.emit_json("trace.json", {"steps": trace.to_records()})
    summary = {**trace.summary(), **extra, "mode": cfg.mode, "energy": energy}
    state.emit_json("summary.json", summary)
    log.info(f"REDUCE: {trace.status} with {len(trace.steps)} steps, degree {list(trace.degree)}")
    return state
