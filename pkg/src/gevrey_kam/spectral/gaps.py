from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from gevrey_kam.analysis.arithmetic import enumerate_modes, rational_label, torus_distance
from gevrey_kam.analysis.cocycle import UHVerdict, is_uniformly_hyperbolic
from gevrey_kam.analysis.fourier import TWO_PI, GevreyParams
from gevrey_kam.config import RotationControls, ScanControls, UHControls
from gevrey_kam.errors import ConfigError
from gevrey_kam.spectral.schrodinger import (
    IdsCurve,
    SchrodingerProblem,
    ids_curve,
    schrodinger_cocycle,
    schrodinger_rotation,
)

log = logging.getLogger(__name__)

FLAT_FRACTION = 0.25
FLAT_SAMPLES = 5
GAP_GROWTH = 4.0
GAP_GROWTH_FRACTION = 0.125
MAX_UH_WINDOW = 1 << 15
EDGE_CROSS_TOL = 5e-3
GAP_COLUMNS = ["k", "E_minus", "E_plus", "length", "bound", "pass"]
LABEL_COLUMNS = ["k", "E_minus", "E_plus", "length", "rho", "residual", "uh"]
EDGE_COLUMNS = ["k", "E_minus", "E_plus", "d_minus", "d_plus", "boundary_states", "pass"]


@dataclass(frozen=True)
class GapRecord:
    """Open gap (E_minus, E_plus) carrying the label k with N = <k,alpha> mod 1 on it."""

    k: tuple[int, ...]
    E_minus: float
    E_plus: float
    rho: float
    residual: float
    uh: UHVerdict = "undecided"
    uh_growth: float = 0.0
    edge_uh: tuple[UHVerdict, UHVerdict] = ("undecided", "undecided")

    @property
    def length(self) -> float:
        return self.E_plus - self.E_minus

    @property
    def k_l1(self) -> int:
        return int(np.sum(np.abs(self.k)))

    def to_row(self) -> dict[str, Any]:
        return {
            "k": " ".join(str(v) for v in self.k),
            "E_minus": self.E_minus,
            "E_plus": self.E_plus,
            "length": self.length,
            "rho": self.rho,
            "residual": self.residual,
            "uh": self.uh,
        }


@dataclass
class GapScan:
    gaps: list[GapRecord]
    curve: IdsCurve
    unlabelled: list[tuple[float, float, float]] = field(default_factory=list)
    collapsed: list[tuple[int, ...]] = field(default_factory=list)
    unconfirmed: list[tuple[tuple[int, ...], UHVerdict]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([g.to_row() for g in self.gaps], columns=LABEL_COLUMNS)


class _Labeller:
    """Batched label membership: which energies sit on the plateau 2 rho = <k,alpha>."""

    def __init__(
        self,
        prob: SchrodingerProblem,
        rotation: RotationControls,
        seed: int,
        tol: float,
    ) -> None:
        self.prob = prob
        self.rotation = rotation
        self.seed = seed
        self.tol = tol

    def estimate(self, energies: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        est = schrodinger_rotation(self.prob, energies, self.rotation, self.seed)
        return np.array([x.value for x in est]), np.array([x.error for x in est])

    def rho(self, energies: np.ndarray) -> np.ndarray:
        return self.estimate(energies)[0]

    def residual(self, rho: np.ndarray, k: Sequence[int]) -> np.ndarray:
        return np.asarray(torus_distance(2.0 * rho - float(np.dot(k, self.prob.alpha))))

    def member(self, energies: np.ndarray, k: Sequence[int]) -> np.ndarray:
        return self.residual(self.rho(energies), k) <= self.tol


def gap_label(rho: float, alpha: np.ndarray, k_max: int, tol: float) -> tuple[int, ...] | None:
    """Smallest k with |k|_1 <= k_max and 2 rho = <k,alpha> mod 1 within tol."""
    return rational_label(rho, alpha, k_max, tol)


def _refine_edge(
    lab: _Labeller, k: Sequence[int], outside: float, inside: float, scan: ScanControls
) -> float:
    """Multisection between an unlabelled and a labelled energy; returns the labelled end."""
    lo, hi = outside, inside
    while abs(hi - lo) > scan.edge_tol:
        pts = np.linspace(lo, hi, scan.multisection + 2)[1:-1]
        hits = np.flatnonzero(lab.member(pts, k))
        if hits.size == 0:
            lo = pts[-1]
        else:
            j = int(hits[0])
            lo, hi = (lo if j == 0 else pts[j - 1]), pts[j]
    return float(hi)


def _locate(
    lab: _Labeller, k: Sequence[int], curve: IdsCurve, scan: ScanControls
) -> float | None:
    """An energy labelled k, from the coarse grid or by following the crossing of N."""
    e = curve.energies
    on = lab.residual(curve.rho, k) <= lab.tol
    if np.any(on):
        runs = np.split(np.flatnonzero(on), np.flatnonzero(np.diff(np.flatnonzero(on)) > 1) + 1)
        best = max(runs, key=len)
        return float(e[best[len(best) // 2]])
    target = float(np.dot(k, lab.prob.alpha) % 1.0)
    above = np.flatnonzero(curve.values >= target)
    if above.size == 0 or above[0] == 0:
        return None
    i = int(above[0])
    lo, hi = float(e[i - 1]), float(e[i])
    while hi - lo > scan.edge_tol:
        pts = np.linspace(lo, hi, scan.multisection + 2)[1:-1]
        rho = lab.rho(pts)
        hits = np.flatnonzero(lab.residual(rho, k) <= lab.tol)
        if hits.size:
            return float(pts[hits[0]])
        n_vals = 1.0 - 2.0 * np.minimum(-rho % 1.0, 1.0 - (-rho % 1.0))
        j = int(np.searchsorted(n_vals, target))
        lo = lo if j == 0 else float(pts[j - 1])
        hi = hi if j == pts.size else float(pts[j])
    return None


def _uh_verdict(
    prob: SchrodingerProblem, energy: float, controls: UHControls
) -> tuple[UHVerdict, float]:
    """UH test at one energy, doubling the window on inconclusive answers."""
    c = schrodinger_cocycle(prob, energy)
    report = is_uniformly_hyperbolic(c, controls)
    n_win = controls.n_win
    for _ in range(controls.retries):
        if report.verdict == "UH" or n_win >= MAX_UH_WINDOW:
            break
        n_win = min(2 * n_win, MAX_UH_WINDOW)
        report = is_uniformly_hyperbolic(c, controls.model_copy(update={"n_win": n_win}))
    return report.verdict, report.min_growth


def interior_controls(length: float, controls: UHControls) -> UHControls:
    """UH controls for the centre of a gap of the given length.

    The Lyapunov exponent there is about length / (4 sin x) for E = 2 cos x, so the growth
    threshold drops to GAP_GROWTH_FRACTION * length and the window stretches until the
    required norm growth is e^GAP_GROWTH.
    """
    growth = min(controls.growth, GAP_GROWTH_FRACTION * length)
    n_win = max(controls.n_win, int(np.ceil(GAP_GROWTH / growth)))
    return controls.model_copy(update={"growth": growth, "n_win": min(n_win, MAX_UH_WINDOW)})


def _resolve_gap(
    lab: _Labeller,
    k: tuple[int, ...],
    curve: IdsCurve,
    scan: ScanControls,
    uh: UHControls,
) -> tuple[GapRecord | None, UHVerdict | None]:
    """The open gap labelled k, or None with the interior verdict of a rejected candidate."""
    seed_e = _locate(lab, k, curve, scan)
    if seed_e is None:
        log.debug(f"GAPS: no energy carries label {k}")
        return None, None
    e = curve.energies
    spacing = float(e[1] - e[0]) if e.size > 1 else 1.0
    lower, upper = seed_e - spacing, seed_e + spacing
    while lab.member(np.array([lower]), k)[0]:
        lower -= spacing
    while lab.member(np.array([upper]), k)[0]:
        upper += spacing
    E_minus = _refine_edge(lab, k, lower, seed_e, scan)
    E_plus = _refine_edge(lab, k, upper, seed_e, scan)
    if E_plus - E_minus <= 2.0 * scan.edge_tol:
        return None, None
    samples = E_minus + (E_plus - E_minus) * np.linspace(0.1, 0.9, FLAT_SAMPLES)
    rho, errors = lab.estimate(samples)
    res = lab.residual(rho, k)
    # a band crossing the label value is V-shaped in the residual, a gap is flat to noise
    excess = float(np.max(res - errors))
    if excess > FLAT_FRACTION * lab.tol:
        log.info(
            f"GAPS: label {k} candidate [{E_minus:.10g}, {E_plus:.10g}] rejected, residual "
            f"{excess:.3e} above {FLAT_FRACTION * lab.tol:.1e} (n_iter={lab.rotation.n_iter})"
        )
        return None, None
    mid = 0.5 * (E_minus + E_plus)
    inner = interior_controls(E_plus - E_minus, uh)
    verdict, growth = _uh_verdict(lab.prob, mid, inner)
    if verdict != "UH":
        log.info(
            f"GAPS: label {k} candidate [{E_minus:.10g}, {E_plus:.10g}] rejected, interior "
            f"is {verdict} (growth {growth:.3e}, threshold {inner.growth:.3e}, "
            f"n_win={inner.n_win})"
        )
        return None, verdict
    edges = (_uh_verdict(lab.prob, E_minus, uh)[0], _uh_verdict(lab.prob, E_plus, uh)[0])
    if "UH" in edges:
        log.warning(f"GAPS: an edge of gap {k} tests UH, edges may be inside the gap")
    record = GapRecord(
        k,
        E_minus,
        E_plus,
        float(rho[FLAT_SAMPLES // 2]),
        float(np.max(res)),
        verdict,
        growth,
        edges,
    )
    return record, verdict


def _unlabelled_plateaus(
    curve: IdsCurve, labels: list[tuple[int, ...] | None], scan: ScanControls
) -> list[tuple[float, float, float]]:
    out = []
    flat = np.abs(np.diff(curve.rho)) <= FLAT_FRACTION * scan.label_tol
    start = None
    for i, is_flat in enumerate(list(flat) + [False]):
        unlabelled = labels[i] is None
        if is_flat and unlabelled and start is None:
            start = i
        elif start is not None and not (is_flat and unlabelled):
            if i - start >= scan.min_run:
                out.append((float(curve.energies[start]), float(curve.energies[i]), curve.rho[i]))
            start = None
    return out


def find_gaps(
    prob: SchrodingerProblem,
    e_range: tuple[float, float] | None = None,
    scan: ScanControls | None = None,
    rotation: RotationControls | None = None,
    uh: UHControls | None = None,
    seed: int = 0,
    threads: int = 1,
) -> GapScan:
    """Labelled spectral gaps inside e_range.

    Each label k with 0 < |k|_1 <= k_max is looked up on the coarse IDS grid; gaps narrower
    than the grid are found by following the crossing N(E) = <k,alpha> mod 1. Edges are
    refined by multisection on label membership. A candidate is kept only when 2 rho is flat
    across its interior and the centre tests UH; candidates failing the UH test are listed in
    `unconfirmed`.
    """
    scan = scan or ScanControls()
    rotation = rotation or RotationControls()
    uh = uh or UHControls()
    e_min, e_max = e_range or prob.energy_range(scan.e_margin)
    if not (np.isfinite(e_min) and np.isfinite(e_max) and e_min < e_max):
        raise ConfigError(f"energy range must be finite and increasing, got [{e_min}, {e_max}]")
    energies = np.linspace(e_min, e_max, scan.n_energies)
    curve = ids_curve(prob, energies, rotation, seed, threads)
    labels = [gap_label(float(r), prob.alpha, scan.k_max, scan.label_tol) for r in curve.rho]
    lab = _Labeller(prob, rotation, seed, scan.label_tol)

    ks = [tuple(int(v) for v in k) for k in enumerate_modes(prob.dimension, scan.k_max)]
    found = Parallel(n_jobs=max(1, threads), prefer="threads")(
        delayed(_resolve_gap)(lab, k, curve, scan, uh) for k in ks
    )
    gaps = sorted((g for g, _ in found if g is not None), key=lambda g: g.E_minus)
    collapsed = [k for k, (g, v) in zip(ks, found) if g is None and v is None]
    unconfirmed = [(k, v) for k, (g, v) in zip(ks, found) if g is None and v is not None]
    unlabelled = _unlabelled_plateaus(curve, labels, scan)
    for a, b, r in unlabelled:
        log.warning(
            f"GAPS: plateau on [{a:.6g}, {b:.6g}] at rho={r:.10g} has no label "
            f"with |k|_1 <= {scan.k_max}"
        )
    log.info(
        f"GAPS: {len(gaps)} open gaps in [{e_min:.4g}, {e_max:.4g}] "
        f"({len(collapsed)} labels without an open gap, {len(unconfirmed)} without a UH interior)"
    )
    return GapScan(gaps, curve, unlabelled, collapsed, unconfirmed)


# decay of gap lengths


@dataclass(frozen=True)
class DecayCheck:
    k: tuple[int, ...]
    E_minus: float
    E_plus: float
    length: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class DecayReport:
    checks: list[DecayCheck]
    eps0: float
    r: float
    nu: float

    @property
    def pass_fraction(self) -> float:
        if not self.checks:
            return 1.0
        return sum(c.passed for c in self.checks) / len(self.checks)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_frame(self) -> pd.DataFrame:
        """One row per gap: k, E_minus, E_plus, length, bound, pass."""
        return pd.DataFrame(
            [
                {
                    "k": " ".join(str(v) for v in c.k),
                    "E_minus": c.E_minus,
                    "E_plus": c.E_plus,
                    "length": c.length,
                    "bound": c.bound,
                    "pass": c.passed,
                }
                for c in self.checks
            ],
            columns=GAP_COLUMNS,
        )


def decay_bound(k: Sequence[int], eps0: float, p: GevreyParams) -> float:
    """eps0^(1/2) e^{-r |2 pi k|^nu}."""
    k_l1 = float(np.sum(np.abs(k)))
    return float(eps0**0.5 * np.exp(-p.r * (TWO_PI * k_l1) ** p.nu))


def verify_gap_decay(gaps: Sequence[GapRecord], eps0: float, p: GevreyParams) -> DecayReport:
    checks = []
    for g in gaps:
        bound = decay_bound(g.k, eps0, p)
        checks.append(DecayCheck(g.k, g.E_minus, g.E_plus, g.length, bound, g.length <= bound))
    report = DecayReport(checks, eps0, p.r, p.nu)
    log.info(f"GAPS: decay bound holds for {report.pass_fraction:.0%} of {len(checks)} gaps")
    return report


# diagnostics


def spectrum_hull(
    prob: SchrodingerProblem,
    curve: IdsCurve,
    scan: ScanControls | None = None,
    rotation: RotationControls | None = None,
    seed: int = 0,
) -> tuple[float, float]:
    """Bottom and top of the spectrum, refined where N leaves 0 and reaches 1."""
    scan = scan or ScanControls()
    rotation = rotation or RotationControls()
    lab = _Labeller(prob, rotation, seed, scan.label_tol)
    zero = (0,) * prob.dimension
    outside = np.flatnonzero(lab.residual(curve.rho, zero) <= scan.label_tol)
    inside = np.setdiff1d(np.arange(curve.energies.size), outside)
    if inside.size == 0:
        raise ConfigError("the energy range does not meet the spectrum")
    e = curve.energies
    i, j = int(inside[0]), int(inside[-1])
    if i == 0 or j == e.size - 1:
        raise ConfigError("the energy range does not contain the whole spectrum")
    bottom = _refine_edge(lab, zero, float(e[i]), float(e[i - 1]), scan)
    top = _refine_edge(lab, zero, float(e[j]), float(e[j + 1]), scan)
    return bottom, top


def holder_modulus(curve: IdsCurve) -> float:
    """max |N(E) - N(E')| / |E - E'|^(1/2) over neighbouring grid energies."""
    if curve.energies.size < 2:
        return 0.0
    dn = np.abs(np.diff(curve.values))
    de = np.diff(curve.energies)
    return float(np.max(dn / np.sqrt(de)))


@dataclass(frozen=True)
class DiameterCheck:
    diameter: float
    reference: float
    sup_difference: float
    passed: bool


def diameter_check(
    diameter: float, reference: float, sup_difference: float, slack: float = 1e-6
) -> DiameterCheck:
    """|diam sigma(H_a) - diam sigma(H_b)| <= 2 ||v_a - v_b||_inf."""
    passed = abs(diameter - reference) <= 2.0 * sup_difference + slack
    if not passed:
        log.warning(
            f"GAPS: diameter {diameter:.10g} vs {reference:.10g} exceeds "
            f"2 sup|v_a - v_b| = {2 * sup_difference:.3e}"
        )
    return DiameterCheck(diameter, reference, sup_difference, passed)


def edge_cross_check(
    gaps: Sequence[GapRecord], eigenvalues: np.ndarray, tol: float = EDGE_CROSS_TOL
) -> pd.DataFrame:
    """Distance from each gap edge to the nearest finite-section eigenvalue outside the gap.

    Dirichlet truncations add boundary states inside gaps; they are counted, not matched.
    """
    eig = np.sort(np.asarray(eigenvalues, dtype=float))
    rows = []
    for g in gaps:
        below = eig[eig <= g.E_minus]
        above = eig[eig >= g.E_plus]
        d_minus = float(g.E_minus - below[-1]) if below.size else float("inf")
        d_plus = float(above[0] - g.E_plus) if above.size else float("inf")
        inside = int(np.sum((eig > g.E_minus + tol) & (eig < g.E_plus - tol)))
        rows.append(
            {
                "k": " ".join(str(v) for v in g.k),
                "E_minus": g.E_minus,
                "E_plus": g.E_plus,
                "d_minus": d_minus,
                "d_plus": d_plus,
                "boundary_states": inside,
                "pass": d_minus <= tol and d_plus <= tol,
            }
        )
    frame = pd.DataFrame(rows, columns=EDGE_COLUMNS)
    failed = int((~frame["pass"].astype(bool)).sum())
    if failed:
        log.warning(f"GAPS: {failed} of {len(frame)} gap edges miss the finite sections by > {tol}")
    return frame
