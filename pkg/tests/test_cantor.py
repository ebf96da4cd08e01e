from __future__ import annotations

import numpy as np
import pytest

from gevrey_kam.analysis.arithmetic import DiophantineParams
from gevrey_kam.analysis.fourier import FourierSeries, FrequencyLattice, GevreyParams
from gevrey_kam.cantor.intervals import (
    IntervalUnion,
    bounded_gaps,
    bridge,
    canonicalize,
    coarsen,
    diameter,
    from_spec,
    gamma,
    hausdorff_distance,
    middle_thirds,
    newhouse_check,
    sumset,
    thickness,
    thickness_weight,
)
from gevrey_kam.cantor.pipeline import (
    SpectrumApproximation,
    combine_spectra,
    interval_spectrum_pipeline,
    spectrum_from_gaps,
)
from gevrey_kam.config import RotationControls, ScanControls
from gevrey_kam.errors import ConfigError, SumsetBlowupError
from gevrey_kam.spectral.schrodinger import SchrodingerProblem

P0 = GevreyParams(0.5, 1.0)
DIOPH = DiophantineParams(0.2, 3.5)


def _pairs(K: IntervalUnion) -> list[list[float]]:
    return K.to_pairs()


def _random_union(rng: np.random.Generator, thick: bool) -> IntervalUnion:
    n = int(rng.integers(1, 7))
    if thick:
        pieces, gaps = rng.uniform(0.5, 1.5, n), rng.uniform(0.01, 0.4, n)
    else:
        pieces, gaps = rng.uniform(0.01, 1.0, n), rng.uniform(0.01, 3.0, n)
    start, out = rng.uniform(-2.0, 2.0), []
    for length, gap in zip(pieces, gaps):
        out.append((start, start + length))
        start += length + gap
    return canonicalize(out)


# interval unions


def test_canonicalize_cases() -> None:
    assert _pairs(canonicalize([[0, 1], [0.5, 2]])) == [[0.0, 2.0]]
    assert _pairs(canonicalize([[1, 2], [0, 0.5]])) == [[0.0, 0.5], [1.0, 2.0]]
    assert _pairs(canonicalize([[0, 0]])) == [[0.0, 0.0]]
    assert _pairs(canonicalize([[0, 1], [1, 2]])) == [[0.0, 2.0]]
    with pytest.raises(ConfigError):
        canonicalize([])


def test_bounded_gaps_cases() -> None:
    assert bounded_gaps(canonicalize([[0, 1]])).shape == (0, 2)
    np.testing.assert_allclose(bounded_gaps(canonicalize([[0, 1], [2, 3]])), [[1, 2]])
    np.testing.assert_allclose(bounded_gaps(middle_thirds(1)), [[1 / 3, 2 / 3]])


def test_bridge_cases() -> None:
    assert bridge(canonicalize([[0, 1], [2, 3]]), 1.0) == (0.0, 1.0)
    K = middle_thirds(2)
    lo, hi = bridge(K, float(K.starts[1]))
    assert (lo, hi) == pytest.approx((2 / 9, 1 / 3))
    # the bridge runs over the smaller gap and stops at the larger one
    K = canonicalize([[0, 1], [1.2, 2], [2.1, 3], [5, 6]])
    assert bridge(K, 1.2) == (1.2, 3.0)
    assert bridge(K, 3.0) == (0.0, 3.0)
    with pytest.raises(ConfigError):
        bridge(K, 0.5)


@pytest.mark.parametrize("level", [1, 2, 3, 4, 5])
def test_middle_thirds_thickness_is_one(level: int) -> None:
    K = middle_thirds(level)
    assert len(K) == 2**level
    report = thickness(K)
    assert report.tau == pytest.approx(1.0, rel=1e-12)
    assert report.bridge is not None and report.gap is not None


def test_thickness_conventions() -> None:
    interval = thickness(canonicalize([[0, 1]]))
    assert interval.is_infinite
    assert interval.to_dict()["tau"] == "inf"
    assert thickness(canonicalize([[2, 2]])).is_infinite
    isolated = thickness(canonicalize([[0, 1], [2, 2]]))
    assert isolated.tau == 0.0
    assert isolated.u == 2.0
    assert thickness_weight(float("inf")) == 1.0
    assert thickness_weight(1.0) == 0.5


def test_thickness_is_affine_invariant(rng: np.random.Generator) -> None:
    for _ in range(20):
        K = _random_union(rng, thick=False)
        tau = thickness(K).tau
        for scale, shift in [(2.5, 1.0), (-0.3, 4.0)]:
            moved = thickness(K.affine(scale, shift)).tau
            if np.isinf(tau):
                assert np.isinf(moved)
            else:
                assert moved == pytest.approx(tau, rel=1e-9)


def test_gamma_and_diameter() -> None:
    assert gamma(canonicalize([[0, 1]])) == 0.0
    assert gamma(canonicalize([[0, 1], [2, 3]])) == 1.0
    assert gamma(middle_thirds(2)) == pytest.approx(1 / 3)
    assert diameter(middle_thirds(3)) == pytest.approx(1.0)


def test_gamma_and_diameter_are_lipschitz(rng: np.random.Generator) -> None:
    for _ in range(20):
        K = _random_union(rng, thick=False)
        jittered = canonicalize(K.intervals + rng.uniform(-1e-9, 1e-9, K.intervals.shape))
        dist = hausdorff_distance(K, jittered)
        assert dist <= 1e-9 + 1e-15
        assert abs(gamma(K) - gamma(jittered)) <= 2 * dist + 1e-15
        assert abs(diameter(K) - diameter(jittered)) <= 2 * dist + 1e-15


def test_hausdorff_sees_covered_gaps() -> None:
    X = canonicalize([[0, 1]])
    Y = canonicalize([[0, 0.1], [0.9, 1]])
    assert hausdorff_distance(X, Y) == pytest.approx(0.4)
    assert hausdorff_distance(Y, Y) == 0.0


# the sum condition and Minkowski sums


def test_newhouse_pass_for_middle_thirds() -> None:
    report = newhouse_check([middle_thirds(3), middle_thirds(3)])
    assert report.passed
    assert report.weight_sum == pytest.approx(1.0)


def test_newhouse_fails_on_large_gap() -> None:
    report = newhouse_check([canonicalize([[0, 1], [5, 6]]), canonicalize([[0, 1e-3]])])
    assert not report.passed
    assert any(v.startswith("Gamma(K_1)") for v in report.violations)


def test_newhouse_fails_on_thin_sets() -> None:
    thin = canonicalize([[0, 0.1], [1.1, 1.2]])
    assert thickness(thin).tau == pytest.approx(0.1)
    report = newhouse_check([thin, thin])
    assert not report.passed
    assert report.weight_sum == pytest.approx(2 * 0.1 / 1.1)
    assert "sum tau" in report.violations[-1]
    with pytest.raises(ConfigError):
        newhouse_check([thin])


def test_sumset_cases() -> None:
    assert _pairs(sumset([canonicalize([[0, 1]]), canonicalize([[0, 1]])])) == [[0.0, 2.0]]
    K = middle_thirds(3)
    shifted = sumset([canonicalize([[0.5, 0.5]]), K])
    np.testing.assert_allclose(shifted.intervals, K.intervals + 0.5, atol=1e-15)
    single = sumset([canonicalize([[0, 1]]), canonicalize([[2, 5]])])
    assert diameter(single) == pytest.approx(4.0)
    three = sumset([middle_thirds(2), middle_thirds(2), canonicalize([[0, 1]])])
    assert _pairs(three) == [[0.0, 3.0]]


@pytest.mark.parametrize("level", [1, 2, 3, 4, 5])
def test_middle_thirds_sum_is_an_interval(level: int) -> None:
    K = middle_thirds(level)
    assert _pairs(sumset([K, K])) == [[0.0, 2.0]]


def test_sumset_cap_and_coarsening() -> None:
    K = middle_thirds(10)
    with pytest.raises(SumsetBlowupError):
        sumset([K, K], cap=1000)
    assert len(coarsen(K, 1e-2)) == 16
    assert _pairs(sumset([K, K], cap=1000, eps=1e-2)) == [[0.0, 2.0]]


def test_sum_condition_forces_intervals(rng: np.random.Generator) -> None:
    passes = 0
    for i in range(500):
        sets = [_random_union(rng, thick=i % 2 == 0) for _ in range(int(rng.integers(2, 4)))]
        if newhouse_check(sets).passed:
            passes += 1
            assert sumset(sets).is_interval()
    assert passes >= 250


def test_from_spec() -> None:
    assert len(from_spec("middle_thirds:3")) == 8
    assert _pairs(from_spec([[2, 3], [0, 1]])) == [[0.0, 1.0], [2.0, 3.0]]
    with pytest.raises(ConfigError):
        from_spec("cantor:3")
    with pytest.raises(ConfigError):
        middle_thirds(-1)


# separable spectra


def test_spectrum_from_gaps() -> None:
    K = spectrum_from_gaps(-2.0, 2.0, [(-1.0, -0.5), (3.0, 4.0)])
    assert _pairs(K) == [[-2.0, -1.0], [-0.5, 2.0]]
    assert _pairs(spectrum_from_gaps(-2.0, 2.0, [])) == [[-2.0, 2.0]]


def test_combine_free_spectra() -> None:
    band = SpectrumApproximation(canonicalize([[-2, 2]]), [])
    report = combine_spectra([band, band])
    assert report.newhouse.passed
    assert report.is_interval
    assert _pairs(report.total) == [[-4.0, 4.0]]
    assert report.summary()["spectra"][0]["thickness"]["tau"] == "inf"


def test_combine_planted_gap_fails_with_witness() -> None:
    small = SpectrumApproximation(canonicalize([[0, 0.1]]), [])
    gapped = SpectrumApproximation(canonicalize([[-2, -1.9], [1.9, 2]]), [])
    report = combine_spectra([small, gapped])
    assert not report.newhouse.passed
    assert any("Gamma(K_2)" in v for v in report.newhouse.violations)
    assert not report.is_interval


def test_pipeline_on_free_problems(golden: float, silver: float) -> None:
    lattice = FrequencyLattice(1)
    problems = [
        SchrodingerProblem(FourierSeries.zero(lattice, "scalar-real"), a, P0)
        for a in (golden, silver)
    ]
    scan = ScanControls(n_energies=200, k_max=2)
    report = interval_spectrum_pipeline(problems, 0.5, DIOPH, scan, RotationControls(n_iter=1000))
    assert report.newhouse.passed
    assert report.is_interval
    lo, hi = report.total.hull
    assert lo == pytest.approx(-4.0, abs=2e-3)
    assert hi == pytest.approx(4.0, abs=2e-3)


@pytest.mark.slow
def test_pipeline_on_weak_amo(golden: float, silver: float) -> None:
    problems = [SchrodingerProblem.amo(1e-3, a, P0) for a in (golden, silver)]
    scan = ScanControls(n_energies=600, k_max=3)
    report = interval_spectrum_pipeline(
        problems, 0.5, DIOPH, scan, RotationControls(n_iter=2000), threads=2
    )
    assert all(len(a.gaps) >= 2 for a in report.approximations)
    assert report.newhouse.passed
    assert report.is_interval
    for a in report.approximations:
        assert a.diameter is not None and a.diameter.passed
        assert set(a.ratios.columns) >= {"k", "bridge_ratio", "lower_bound"}
