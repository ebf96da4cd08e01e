from __future__ import annotations

import logging

import numpy as np

from gevrey_kam.analysis.fourier import TWO_PI
from gevrey_kam.config import DualityConfig
from gevrey_kam.duality.eigenfunctions import (
    coupling_sweep,
    dual_eigenfunction,
    dual_problem,
    dual_reduction,
    energy_for_rotation,
    goodness_census,
)
from gevrey_kam.duality.lattice import good_eigenfunction_test
from gevrey_kam.types import ExperimentState

log = logging.getLogger(__name__)


def duality_node(state: ExperimentState) -> ExperimentState:
    cfg = state.config
    assert isinstance(cfg, DualityConfig)
    p0, dioph = state.results["p0"], state.results["dioph"]
    v, lam = cfg.series().symmetrize(), cfg.coupling
    prob = dual_problem(v, lam, cfg.alpha, p0)
    if cfg.energy is not None:
        energy = cfg.energy
    else:
        assert cfg.rho is not None
        energy = energy_for_rotation(prob, cfg.rho, cfg.rotation, cfg.seed)

    red = dual_reduction(
        prob,
        energy,
        cfg.r,
        dioph,
        cfg.kappa,
        cfg.dc_tau,
        cfg.kam,
        cfg.rotation,
        cfg.scan_radius,
        cfg.seed,
    )
    eig = dual_eigenfunction(
        red.B,
        red.A_final,
        v,
        lam,
        cfg.alpha,
        energy,
        cfg.m_prime,
        p0.with_width(cfg.r),
        cap=cfg.max_window,
    )
    C = cfg.good_C if cfg.good_C is not None else TWO_PI**cfg.nu * cfg.r
    goodness = good_eigenfunction_test(eig.u, cfg.nu, cfg.good_N, C, cfg.good_eps)
    state.results["eigenfunction"] = eig
    state.results["goodness"] = goodness

    state.emit_csv("eigenfunction.csv", eig.u.to_frame())
    state.emit_json(
        "duality.json",
        {
            "eigenfunction": eig.to_dict(),
            "goodness": goodness.to_dict(),
            "reduction": {
                "rho": red.rho,
                "rho_final": red.rho_final,
                "degree": list(red.B.degree),
                "steps": len(red.trace.steps),
                "residual": red.residual,
                "tail_deviation": red.tail_deviation,
                "tail_bound": red.tail_bound,
            },
        },
    )

    if cfg.census_phases:
        phases = (np.arange(cfg.census_phases) + 0.5) / cfg.census_phases
        census = goodness_census(
            v,
            lam,
            cfg.alpha,
            p0,
            cfg.r,
            dioph,
            cfg.kappa,
            cfg.dc_tau,
            phases.tolist(),
            cfg.census_box,
            (cfg.good_N, C, cfg.good_eps),
            cfg.kam,
            cfg.rotation,
            cfg.seed,
            state.threads,
        )
        state.emit_csv("census.csv", census)
    if cfg.sweep:
        sweep = coupling_sweep(
            v,
            cfg.sweep,
            cfg.alpha,
            p0,
            cfg.r,
            dioph,
            cfg.kappa,
            cfg.dc_tau,
            cfg.energy,
            cfg.rho,
            cfg.kam,
            cfg.rotation,
            cfg.seed,
        )
        state.emit_csv("sweep.csv", sweep)

    log.info(
        f"DUALITY: residual={eig.residual:.3e} good={goodness.good} "
        f"(worst ratio {goodness.worst_ratio:.3e})"
    )
    return state
