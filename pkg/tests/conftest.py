from __future__ import annotations

from typing import Callable

import numpy as np
import pytest

from gevrey_kam.analysis.arithmetic import GOLDEN, SILVER
from gevrey_kam.analysis.fourier import FourierSeries, FrequencyLattice, GevreyParams


@pytest.fixture
def golden() -> float:
    return float(GOLDEN)


@pytest.fixture
def silver() -> float:
    return float(SILVER)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def lattice1() -> FrequencyLattice:
    return FrequencyLattice(1)


@pytest.fixture
def amo() -> Callable[[float], FourierSeries]:
    """v(theta) = 2 lam cos(2 pi theta_1)."""

    def build(lam: float, dimension: int = 1) -> FourierSeries:
        mode = [1] + [0] * (dimension - 1)
        return FourierSeries.cosine(FrequencyLattice(dimension), mode, 2.0 * lam)

    return build


@pytest.fixture
def random_sl2r_series(rng: np.random.Generator) -> Callable[..., FourierSeries]:
    """Real sl(2,R)-valued series on T^1 with a prescribed Gevrey norm."""

    def build(size: float, radius: int = 3, nu: float = 0.5, r: float = 1.0) -> FourierSeries:
        lattice = FrequencyLattice(1)
        coeffs: dict[tuple[int, ...], np.ndarray] = {}
        for k in range(0, radius + 1):
            h, s, j = rng.normal(size=3) + 1j * rng.normal(size=3) * (k > 0)
            mat = np.array([[h, s + j], [s - j, -h]], dtype=np.complex128)
            coeffs[(k,)] = mat
            if k > 0:
                coeffs[(-k,)] = np.conj(mat)
        series = FourierSeries.from_mapping(lattice, coeffs, "matrix")
        return series * (size / series.gevrey_norm(GevreyParams(nu, r)))

    return build
