from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import pandas as pd

from gevrey_kam.analysis.arithmetic import DiophantineParams, torus_distance
from gevrey_kam.analysis.fourier import TWO_PI
from gevrey_kam.cantor.intervals import (
    SUMSET_CAP,
    IntervalUnion,
    NewhouseReport,
    ThicknessReport,
    bridge,
    canonicalize,
    diameter,
    gamma,
    newhouse_check,
    sumset,
    thickness,
)
from gevrey_kam.config import RotationControls, ScanControls, UHControls
from gevrey_kam.errors import check_contract
from gevrey_kam.spectral.gaps import (
    DiameterCheck,
    GapRecord,
    diameter_check,
    find_gaps,
    holder_modulus,
    spectrum_hull,
)
from gevrey_kam.spectral.schrodinger import SchrodingerProblem

log = logging.getLogger(__name__)

FREE_DIAMETER = 4.0


@dataclass
class SpectrumApproximation:
    """Sigma approximated by its hull with the detected open gaps removed."""

    spectrum: IntervalUnion
    gaps: list[GapRecord]
    eps0: float = float("nan")
    holder: float = float("nan")
    diameter: DiameterCheck | None = None
    ratios: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def thickness(self) -> ThicknessReport:
        return thickness(self.spectrum)


def spectrum_from_gaps(
    bottom: float, top: float, gaps: Sequence[tuple[float, float]]
) -> IntervalUnion:
    """[bottom, top] minus the open gaps that meet it."""
    cuts = sorted((max(a, bottom), min(b, top)) for a, b in gaps if b > bottom and a < top)
    pieces, start = [], bottom
    for a, b in cuts:
        if a > start:
            pieces.append((start, a))
        start = max(start, b)
    if start < top or not pieces:
        pieces.append((start, top))
    return canonicalize(pieces)


def thickness_ratios(
    spectrum: IntervalUnion,
    gaps: Sequence[GapRecord],
    alpha: np.ndarray,
    eps0: float,
    modulus: float,
    r: float,
    nu: float,
    dioph: DiophantineParams,
) -> pd.DataFrame:
    """Per gap: the measured l(C)/l(G_k) at E_k^+ next to the lower bound
    gamma^2 / (C0^2 eps0^(1/2)) / (e^{-r (2 pi |k|)^nu} |k|^(2 tau)), with C0 the measured
    Holder modulus of N.
    """
    rows = []
    ends = set(spectrum.starts.tolist())
    for g in gaps:
        k_l1 = float(np.sum(np.abs(g.k)))
        lower = (
            dioph.gamma**2
            / (modulus**2 * eps0**0.5)
            / (np.exp(-r * (TWO_PI * k_l1) ** nu) * k_l1 ** (2 * dioph.tau))
            if modulus > 0 and eps0 > 0
            else float("inf")
        )
        measured = float("nan")
        if g.E_plus in ends and g.length > 0:
            C = bridge(spectrum, g.E_plus)
            measured = (C[1] - C[0]) / g.length
        rows.append(
            {
                "k": " ".join(str(v) for v in g.k),
                "length": g.length,
                "bridge_ratio": measured,
                "lower_bound": lower,
                "ids_jump": float(torus_distance(float(np.dot(g.k, alpha)))),
            }
        )
    return pd.DataFrame(rows)


def spectrum_approximation(
    prob: SchrodingerProblem,
    r: float,
    dioph: DiophantineParams,
    scan: ScanControls | None = None,
    rotation: RotationControls | None = None,
    uh: UHControls | None = None,
    seed: int = 0,
    threads: int = 1,
) -> SpectrumApproximation:
    scan = scan or ScanControls()
    rotation = rotation or RotationControls()
    result = find_gaps(prob, None, scan, rotation, uh, seed, threads)
    bottom, top = spectrum_hull(prob, result.curve, scan, rotation, seed)
    spectrum = spectrum_from_gaps(bottom, top, [(g.E_minus, g.E_plus) for g in result.gaps])
    modulus = holder_modulus(result.curve)
    eps0 = prob.eps0
    diam = diameter_check(diameter(spectrum), FREE_DIAMETER, prob.v_bound())
    ratios = thickness_ratios(
        spectrum, result.gaps, prob.alpha, eps0, modulus, r, prob.p.nu, dioph
    )
    log.info(
        f"CANTOR: spectrum in [{bottom:.8g}, {top:.8g}] with {len(result.gaps)} gaps, "
        f"C0={modulus:.3e} eps0={eps0:.3e}"
    )
    return SpectrumApproximation(spectrum, result.gaps, eps0, modulus, diam, ratios)


@dataclass
class PipelineReport:
    approximations: list[SpectrumApproximation]
    newhouse: NewhouseReport
    total: IntervalUnion

    @property
    def is_interval(self) -> bool:
        return self.total.is_interval()

    def summary(self) -> dict[str, Any]:
        return {
            "newhouse": self.newhouse.to_dict(),
            "sum": self.total.to_pairs(),
            "is_interval": self.is_interval,
            "spectra": [
                {
                    "intervals": a.spectrum.to_pairs(),
                    "gamma": gamma(a.spectrum),
                    "diameter": diameter(a.spectrum),
                    "thickness": a.thickness.to_dict(),
                    "eps0": a.eps0,
                    "holder": a.holder,
                    # C0 has no closed form; the modulus is read off the IDS curve
                    "holder_source": "measured",
                    "diameter_check": a.diameter.passed if a.diameter else None,
                }
                for a in self.approximations
            ],
        }


def combine_spectra(
    approximations: Sequence[SpectrumApproximation],
    cap: int = SUMSET_CAP,
    eps: float = 0.0,
) -> PipelineReport:
    """Newhouse conditions on the Sigma_i and their sum, the spectrum of the separable operator."""
    spectra = [a.spectrum for a in approximations]
    report = newhouse_check(spectra)
    total = sumset(spectra, cap, eps)
    if report.passed:
        check_contract("gap conditions imply an interval sum", float(len(total) - 1), 0.0)
    log.info(
        f"CANTOR: sum of {len(spectra)} spectra is "
        + ("one interval" if total.is_interval() else f"{len(total)} pieces")
        + f" [{total.hull[0]:.8g}, {total.hull[1]:.8g}]"
    )
    return PipelineReport(list(approximations), report, total)


def interval_spectrum_pipeline(
    problems: Sequence[SchrodingerProblem],
    r: float,
    dioph: DiophantineParams,
    scan: ScanControls | None = None,
    rotation: RotationControls | None = None,
    uh: UHControls | None = None,
    eps: float = 0.0,
    seed: int = 0,
    threads: int = 1,
) -> PipelineReport:
    approximations = [
        spectrum_approximation(p, r, dioph, scan, rotation, uh, seed, threads) for p in problems
    ]
    return combine_spectra(approximations, eps=eps)
