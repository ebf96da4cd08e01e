from __future__ import annotations

import logging
from typing import Any

from gevrey_kam.config import GapsConfig
from gevrey_kam.spectral.gaps import (
    diameter_check,
    edge_cross_check,
    find_gaps,
    holder_modulus,
    spectrum_hull,
    verify_gap_decay,
)
from gevrey_kam.spectral.schrodinger import SchrodingerProblem, finite_section_union
from gevrey_kam.types import ExperimentState

log = logging.getLogger(__name__)

FREE_DIAMETER = 4.0


def gaps_node(state: ExperimentState) -> ExperimentState:
    cfg = state.config
    assert isinstance(cfg, GapsConfig)
    p0 = state.results["p0"]
    prob = SchrodingerProblem.from_spec(cfg, p0)
    full_range = cfg.e_min is None and cfg.e_max is None
    e_range = None
    if not full_range:
        lo, hi = prob.energy_range(cfg.scan.e_margin)
        e_range = (
            cfg.e_min if cfg.e_min is not None else lo,
            cfg.e_max if cfg.e_max is not None else hi,
        )

    scan = find_gaps(prob, e_range, cfg.scan, cfg.rotation, cfg.uh, cfg.seed, state.threads)
    decay = verify_gap_decay(scan.gaps, prob.eps0, p0.with_width(cfg.r))
    state.results["problem"] = prob
    state.results["gaps"] = scan
    state.results["decay"] = decay

    summary: dict[str, Any] = {
        "gaps": len(scan.gaps),
        "pass_fraction": decay.pass_fraction,
        "all_passed": decay.all_passed,
        "eps0": decay.eps0,
        "r": decay.r,
        "nu": decay.nu,
        "holder": holder_modulus(scan.curve),
        "collapsed": [list(k) for k in scan.collapsed],
        "unconfirmed": [{"k": list(k), "uh": verdict} for k, verdict in scan.unconfirmed],
        "unlabelled": [list(p) for p in scan.unlabelled],
    }
    if full_range:
        bottom, top = spectrum_hull(prob, scan.curve, cfg.scan, cfg.rotation, cfg.seed)
        check = diameter_check(top - bottom, FREE_DIAMETER, prob.v_bound())
        summary["hull"] = [bottom, top]
        summary["diameter_check"] = {
            "diameter": check.diameter,
            "reference": check.reference,
            "sup_difference": check.sup_difference,
            "pass": check.passed,
        }

    state.emit_csv("gaps.csv", decay.to_frame())
    state.emit_csv("labels.csv", scan.to_frame())
    if cfg.finite_section_size:
        eig = finite_section_union(prob, cfg.finite_section_size, cfg.phases, state.threads)
        edges = edge_cross_check(scan.gaps, eig)
        summary["finite_section"] = {
            "size": cfg.finite_section_size,
            "phases": cfg.phases,
            "pass": bool(edges["pass"].all()),
        }
        state.emit_csv("finite_section.csv", edges)
    state.emit_json("summary.json", summary)

    log.info(f"GAPS: {len(scan.gaps)} gaps, decay bound holds for {decay.pass_fraction:.0%}")
    return state
