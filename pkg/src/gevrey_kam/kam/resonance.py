from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gevrey_kam.analysis.arithmetic import (
    DiophantineParams,
    as_frequency,
    enumerate_modes,
    torus_distance,
)
from gevrey_kam.analysis.fourier import TWO_PI, FrequencyLattice, l1_norms
from gevrey_kam.analysis.lie import ad_eigenvalues, canonical_norm
from gevrey_kam.config import KamControls
from gevrey_kam.errors import ConfigError, MultipleResonanceError

log = logging.getLogger(__name__)


def resonance_window(eps: float, r: float, r_plus: float, nu: float) -> float:
    """N = (1/2pi) (2 |ln eps| / (r - r_plus))^{1/nu}, the radius past which the tail is eps^2."""
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"resonance window needs 0 < eps < 1, got {eps}")
    if not 0.0 < r_plus < r:
        raise ConfigError(f"resonance window needs 0 < r_plus < r, got r={r}, r_plus={r_plus}")
    if not 0.0 < nu <= 1.0:
        raise ConfigError(f"Gevrey exponent must lie in (0, 1], got {nu}")
    return float((2.0 * abs(np.log(eps)) / (r - r_plus)) ** (1.0 / nu) / TWO_PI)


def find_resonance(
    xi: float, alpha: float | Sequence[float], window: float, threshold: float
) -> tuple[int, ...] | None:
    """The unique 0 < |n|_1 <= window with |2 xi - <n,alpha>|_T < threshold, if any."""
    a = as_frequency(alpha)
    radius = int(np.floor(window + 1e-12))
    if radius < 1:
        return None
    modes = enumerate_modes(a.size, radius)
    distances = np.asarray(torus_distance(2.0 * xi - modes @ a))
    hits = np.flatnonzero(distances < threshold)
    if hits.size == 0:
        return None
    if hits.size > 1:
        sites = [tuple(int(v) for v in modes[i]) for i in hits]
        raise MultipleResonanceError(sites, [float(distances[i]) for i in hits])
    site = tuple(int(v) for v in modes[hits[0]])
    log.info(f"RESONANCE: n*={site} at distance {distances[hits[0]]:.3e} < {threshold:.3e}")
    return site


@dataclass(frozen=True)
class ResonanceSets:
    """Non-resonance predicates for the linearized operator Y -> A^-1 Y(.+alpha) A - Y.

    `multiplier` is lambda^2 for an eigenvalue lambda of A, so Ad_{A^-1} has eigenvalues
    1, multiplier and 1/multiplier. For A = R_xi this is e^{i 4 pi xi}.
    """

    eta: float
    alpha: np.ndarray
    multiplier: complex
    lattice: FrequencyLattice
    window: float = float("inf")

    @classmethod
    def for_matrix(
        cls,
        A: np.ndarray,
        alpha: float | Sequence[float],
        eta: float,
        window: float = float("inf"),
    ) -> ResonanceSets:
        a = as_frequency(alpha)
        multiplier = complex(ad_eigenvalues(A)[1])
        return cls(eta, a, multiplier, FrequencyLattice(a.size), window)

    @classmethod
    def for_rotation(
        cls,
        xi: float,
        alpha: float | Sequence[float],
        eta: float,
        window: float = float("inf"),
    ) -> ResonanceSets:
        a = as_frequency(alpha)
        mult = complex(np.exp(2j * TWO_PI * xi))
        return cls(eta, a, mult, FrequencyLattice(a.size), window)

    def phases(self, modes: np.ndarray) -> np.ndarray:
        return np.exp(1j * TWO_PI * (self.lattice.frequencies(modes) @ self.alpha))

    def phi1(self, modes: np.ndarray) -> np.ndarray:
        """|e^{i 2 pi <n,alpha>} - 1| >= eta."""
        return np.abs(self.phases(modes) - 1.0) >= self.eta

    def phi2(self, modes: np.ndarray) -> np.ndarray:
        """|e^{i 2 pi (2 xi - <n,alpha>)} - 1| >= eta."""
        return np.abs(self.phases(modes) / self.multiplier - 1.0) >= self.eta

    def symmetric(self, modes: np.ndarray) -> np.ndarray:
        """phi1 together with phi2 for both signs of xi."""
        mirrored = np.abs(self.phases(modes) * self.multiplier - 1.0) >= self.eta
        return self.phi1(modes) & self.phi2(modes) & mirrored

    def eliminable(self, modes: np.ndarray) -> np.ndarray:
        """Modes the elimination step removes: non-resonant, non-zero and inside the window."""
        modes = np.asarray(modes)
        l1 = l1_norms(self.lattice.frequencies(modes))
        return self.symmetric(modes) & (l1 > 0) & (l1 <= self.window + 1e-12)

    def resonant(self, modes: np.ndarray) -> np.ndarray:
        return ~self.eliminable(modes)

    def eta_tilde(self, A: np.ndarray) -> float:
        """Lower bound on the per-mode divisors, eta^3 / (eta^2 + 3||A||^2 eta + 2||A||^4)."""
        a2 = float(canonical_norm(A)) ** 2
        return self.eta**3 / (self.eta**2 + 3.0 * a2 * self.eta + 2.0 * a2 * a2)


def smallness_bound(
    A: np.ndarray,
    r: float,
    r_plus: float,
    nu: float,
    dioph: DiophantineParams,
    controls: KamControls,
) -> float:
    """Default KAM gate c ||A||^-4 (r - r_plus)^{4 nu tau}."""
    norm = float(canonical_norm(A))
    return controls.gate_constant * norm**-4 * (r - r_plus) ** (4.0 * nu * dioph.tau)


def elimination_eta(
    A: np.ndarray, eps: float, controls: KamControls, rotated: bool = False
) -> float:
    """eta = c ||A||^2 eps^x with x = 1/9 (first elimination) or 1/3 (after a Z rotation)."""
    exponent = controls.rotated_eta_exponent if rotated else controls.eta_exponent
    return controls.eta_prefactor * float(canonical_norm(A)) ** 2 * eps**exponent


def effective_window(
    n_window: float, step: int, controls: KamControls, support: int = 0
) -> int:
    """N_eff = min(N_j, max(min(max_modes 2^j, mode_ceiling), support)).

    The window never drops below the support of the incoming perturbation, so the tail left
    after elimination is made of product terms only.
    """
    cap = max(min(controls.max_modes * 2**step, controls.mode_ceiling), support)
    if not np.isfinite(n_window):
        return int(cap)
    return int(min(np.floor(n_window), cap))
