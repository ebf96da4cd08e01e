from __future__ import annotations

import numpy as np
import pytest

from gevrey_kam.analysis.fourier import (
    FourierSeries,
    FrequencyLattice,
    GevreyParams,
    evaluate,
    gevrey_norm,
    project,
    series_product,
    truncate,
)
from gevrey_kam.analysis.grid import SampleGrid
from gevrey_kam.errors import ConfigError, DimensionError, LatticeMismatchError


def _random_scalar(rng: np.random.Generator, radius: int = 6, d: int = 1) -> FourierSeries:
    lattice = FrequencyLattice(d)
    modes = rng.integers(-radius, radius + 1, size=(12, d))
    coeffs = rng.normal(size=12) + 1j * rng.normal(size=12)
    return FourierSeries(lattice, modes, coeffs).symmetrize()


def test_gevrey_norm_cases(lattice1: FrequencyLattice) -> None:
    p = GevreyParams(0.5, 1.0)
    assert gevrey_norm(FourierSeries.zero(lattice1), p) == 0.0
    single = FourierSeries(lattice1, [[3]], [2.0 - 1.0j])
    assert gevrey_norm(single, p) == pytest.approx(abs(2 - 1j) * np.exp((2 * np.pi * 3) ** 0.5))
    two_cos = FourierSeries.cosine(lattice1, [1], 2.0)
    assert gevrey_norm(two_cos, p) == pytest.approx(2.0 * np.exp((2.0 * np.pi) ** 0.5))


def test_half_period_weight_uses_pi_k() -> None:
    lattice = FrequencyLattice(1, half_period=True)
    f = FourierSeries(lattice, [[3]], [1.0])
    p = GevreyParams(0.5, 0.7)
    assert f.gevrey_norm(p) == pytest.approx(np.exp(0.7 * (np.pi * 3) ** 0.5))


def test_matrix_norm_is_canonical(lattice1: FrequencyLattice) -> None:
    mat = np.array([[0.0, 3.0], [-1.0, 0.0]])
    f = FourierSeries.constant(lattice1, mat)
    assert f.kind == "matrix"
    assert f.gevrey_norm(GevreyParams(0.5, 1.0)) == pytest.approx(6.0)


def test_gevrey_params_validation() -> None:
    with pytest.raises(ConfigError):
        GevreyParams(1.0, 1.0)
    with pytest.raises(ConfigError):
        GevreyParams(0.5, 0.0)


def test_dimension_limits() -> None:
    with pytest.raises(DimensionError):
        FrequencyLattice(4)
    with pytest.raises(DimensionError):
        FrequencyLattice(0)


def test_truncate_cases(lattice1: FrequencyLattice) -> None:
    f = FourierSeries.cosine(lattice1, [1], 2.0) + FourierSeries.cosine(lattice1, [3], 2.0)
    assert truncate(f, 10).max_difference(f) == 0.0
    assert truncate(FourierSeries(lattice1, [[3]], [1.0]), 2).is_zero()
    assert truncate(f, 1).max_difference(FourierSeries.cosine(lattice1, [1], 2.0)) == 0.0


def test_truncate_idempotent_and_nonexpansive(rng: np.random.Generator) -> None:
    f = _random_scalar(rng, d=2)
    p = GevreyParams(0.4, 0.8)
    once = truncate(f, 3)
    assert truncate(once, 3).max_difference(once) == 0.0
    assert once.gevrey_norm(p) <= f.gevrey_norm(p)
    assert np.all(np.abs(once.modes).sum(axis=1) <= 3)


def test_project_cases(lattice1: FrequencyLattice, rng: np.random.Generator) -> None:
    f = _random_scalar(rng)
    everything = project(f, lambda modes: np.ones(len(modes), dtype=bool))
    assert everything.max_difference(f) == 0.0
    zero_only = project(f, lambda modes: np.all(modes == 0, axis=1))
    assert zero_only.size <= 1
    assert zero_only.average() == f.average()


def test_project_and_complement_sum_exactly(rng: np.random.Generator) -> None:
    f = _random_scalar(rng, d=2)

    def pred(modes: np.ndarray) -> np.ndarray:
        return modes[:, 0] % 2 == 0

    inside = project(f, pred)
    outside = project(f, lambda modes: ~pred(modes))
    assert (inside + outside).max_difference(f) == 0.0


def test_project_truncate_commute(rng: np.random.Generator) -> None:
    f = _random_scalar(rng, d=2)

    def pred(modes: np.ndarray) -> np.ndarray:
        return modes[:, 1] >= 0

    a = truncate(project(f, pred), 4)
    b = project(truncate(f, 4), pred)
    assert a.max_difference(b) == 0.0


def test_evaluate_cases(lattice1: FrequencyLattice) -> None:
    assert evaluate(FourierSeries.zero(lattice1), [0.3]) == 0.0
    assert evaluate(FourierSeries.constant(lattice1, 2.5), [0.71]) == pytest.approx(2.5)
    two_cos = FourierSeries.cosine(lattice1, [1], 2.0)
    assert evaluate(two_cos, [0.25]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DimensionError):
        evaluate(FourierSeries.zero(lattice1), [0.1, 0.2])


def test_evaluate_is_linear(rng: np.random.Generator) -> None:
    f, g = _random_scalar(rng), _random_scalar(rng)
    theta = rng.random((7, 1))
    np.testing.assert_allclose(
        (f + g * 3.0).evaluate(theta), f.evaluate(theta) + 3.0 * g.evaluate(theta), atol=1e-12
    )


def test_series_product_cases(lattice1: FrequencyLattice) -> None:
    f = FourierSeries.cosine(lattice1, [1], 2.0)
    one = FourierSeries.constant(lattice1, 1.0)
    assert series_product(f, one).max_difference(f) == 0.0
    up = FourierSeries(lattice1, [[1]], [1.0])
    down = FourierSeries(lattice1, [[-1]], [1.0])
    assert series_product(up, down).max_difference(one) == 0.0
    square = series_product(f, f)
    expected = FourierSeries.constant(lattice1, 2.0) + FourierSeries.cosine(lattice1, [2], 2.0)
    assert square.max_difference(expected) < 1e-15


def test_series_product_banach_and_pointwise(rng: np.random.Generator) -> None:
    f, g = _random_scalar(rng, d=2), _random_scalar(rng, d=2)
    fg = series_product(f, g)
    for p in (GevreyParams(0.3, 0.5), GevreyParams(0.8, 2.0)):
        assert fg.gevrey_norm(p) <= f.gevrey_norm(p) * g.gevrey_norm(p) * (1 + 1e-12)
    theta = rng.random((9, 2))
    np.testing.assert_allclose(
        fg.evaluate(theta), f.evaluate(theta) * g.evaluate(theta), atol=1e-12
    )


def test_series_product_lattice_mismatch(lattice1: FrequencyLattice) -> None:
    f = FourierSeries.constant(lattice1, 1.0)
    g = FourierSeries.constant(FrequencyLattice(1, half_period=True), 1.0)
    with pytest.raises(LatticeMismatchError):
        series_product(f, g)


def test_norm_monotone_in_width(rng: np.random.Generator) -> None:
    f = _random_scalar(rng, d=3, radius=3)
    norms = [f.gevrey_norm(GevreyParams(0.5, r)) for r in (0.1, 0.5, 1.0, 2.0)]
    assert norms == sorted(norms)


def test_tail_bound(rng: np.random.Generator) -> None:
    p = GevreyParams(0.5, 1.0)
    r_plus = 0.6
    for _ in range(20):
        f = _random_scalar(rng, radius=12)
        for n in (0, 2, 5, 9):
            tail = f - truncate(f, n)
            bound = f.gevrey_norm(p) * np.exp(-(p.r - r_plus) * (2 * np.pi * n) ** p.nu)
            assert tail.gevrey_norm(p.with_width(r_plus)) <= bound * (1 + 1e-12)


def test_real_series_stay_real(rng: np.random.Generator) -> None:
    f, g = _random_scalar(rng), _random_scalar(rng)
    assert f.kind == "scalar-real"
    for h in (f + g, f - g, f * 2.0, truncate(f, 2), series_product(f, g), f.shift([0.3])):
        assert h.conjugate_symmetry_defect() < 1e-13


def test_from_rows_round_trip_and_kind() -> None:
    rows = [[1, 0.5, 0.0], [-1, 0.5, 0.0]]
    f = FourierSeries.from_rows(rows, 1)
    assert f.kind == "scalar-real"
    assert sorted(f.to_rows()) == sorted(rows)
    g = FourierSeries.from_rows([[1, 0.5, 0.0]], 1)
    assert g.kind == "scalar-complex"
    with pytest.raises(DimensionError):
        FourierSeries.from_rows([[1, 2, 0.5, 0.0]], 1)


def test_shift_matches_translated_evaluation(rng: np.random.Generator) -> None:
    f = _random_scalar(rng, d=2)
    alpha = np.array([0.31, 0.77])
    theta = rng.random((5, 2))
    np.testing.assert_allclose(
        f.shift(alpha).evaluate(theta), f.evaluate(theta + alpha), atol=1e-12
    )


def test_immutable(lattice1: FrequencyLattice) -> None:
    f = FourierSeries.constant(lattice1, 1.0)
    with pytest.raises(AttributeError):
        f.kind = "matrix"  # type: ignore[misc]
    with pytest.raises(ValueError):
        f.coeffs[0] = 2.0


def test_grid_fit_recovers_coefficients(rng: np.random.Generator) -> None:
    f = _random_scalar(rng, d=2, radius=2)
    grid = SampleGrid.for_radius(f.lattice, 4)
    fitted = grid.fit(grid.values(f), 4, kind="scalar-complex")
    assert fitted.max_difference(f) < 1e-12


def test_grid_fit_on_half_period(rng: np.random.Generator) -> None:
    lattice = FrequencyLattice(1, half_period=True)
    mats = rng.normal(size=(3, 2, 2))
    f = FourierSeries(lattice, [[-3], [0], [1]], mats, "matrix")
    grid = SampleGrid.for_radius(lattice, 5)
    assert grid.fit(grid.values(f), 5).max_difference(f) < 1e-12
    theta = grid.points[:4]
    np.testing.assert_allclose(grid.values(f)[:4], f.evaluate(theta), atol=1e-12)


def test_grid_rejects_unresolvable_radius(lattice1: FrequencyLattice) -> None:
    grid = SampleGrid(lattice1, 8)
    with pytest.raises(DimensionError):
        grid.fit(np.zeros(8), 4, kind="scalar-complex")
