from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from gevrey_kam.config import cantor_level
from gevrey_kam.errors import ConfigError, SumsetBlowupError, check_contract

log = logging.getLogger(__name__)

SUMSET_CAP = 1_000_000
SUM_TOL = 1e-12
CHECK_TOL = 1e-12
INF = float("inf")


@dataclass(frozen=True, eq=False)
class IntervalUnion:
    """Finite union of disjoint closed intervals, sorted; a_i <= b_i < a_{i+1}."""

    intervals: np.ndarray

    def __len__(self) -> int:
        return int(self.intervals.shape[0])

    @property
    def starts(self) -> np.ndarray:
        return self.intervals[:, 0]

    @property
    def ends(self) -> np.ndarray:
        return self.intervals[:, 1]

    @property
    def hull(self) -> tuple[float, float]:
        return float(self.intervals[0, 0]), float(self.intervals[-1, 1])

    def is_interval(self) -> bool:
        return len(self) == 1

    def affine(self, scale: float, shift: float) -> IntervalUnion:
        if scale == 0:
            raise ConfigError("affine image needs a nonzero scale")
        return canonicalize(self.intervals * scale + shift)

    def to_pairs(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in self.intervals]

    def __repr__(self) -> str:
        if len(self) <= 4:
            body = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in self.intervals)
        else:
            body = f"{len(self)} components in [{self.hull[0]:.6g}, {self.hull[1]:.6g}]"
        return f"IntervalUnion({body})"


def canonicalize(raw: Iterable[Sequence[float]] | np.ndarray, tol: float = 0.0) -> IntervalUnion:
    """Sort and merge; intervals closer than `tol` are joined."""
    arr = np.asarray(list(raw) if not isinstance(raw, np.ndarray) else raw, dtype=float)
    if arr.size == 0:
        raise ConfigError("an interval union needs at least one interval")
    arr = arr.reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("interval endpoints must be finite")
    a, b = np.minimum(arr[:, 0], arr[:, 1]), np.maximum(arr[:, 0], arr[:, 1])
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    reach = np.maximum.accumulate(b)
    breaks = np.flatnonzero(a[1:] > reach[:-1] + tol) + 1
    first = np.concatenate([[0], breaks])
    last = np.concatenate([breaks - 1, [a.size - 1]])
    return IntervalUnion(np.column_stack([a[first], reach[last]]))


def bounded_gaps(K: IntervalUnion) -> np.ndarray:
    """The open intervals (b_i, a_{i+1}) between consecutive components, shape (n-1, 2)."""
    return np.column_stack([K.ends[:-1], K.starts[1:]])


def gap_lengths(K: IntervalUnion) -> np.ndarray:
    return K.starts[1:] - K.ends[:-1]


def gamma(K: IntervalUnion) -> float:
    """Length of the largest bounded gap, 0 for an interval."""
    return float(np.max(gap_lengths(K), initial=0.0))


def diameter(K: IntervalUnion) -> float:
    lo, hi = K.hull
    return hi - lo


def _distance_to(Y: IntervalUnion, pts: np.ndarray) -> np.ndarray:
    inside = (pts[:, None] >= Y.starts[None, :]) & (pts[:, None] <= Y.ends[None, :])
    to_start = np.abs(pts[:, None] - Y.starts[None, :])
    to_end = np.abs(pts[:, None] - Y.ends[None, :])
    return np.where(inside.any(axis=1), 0.0, np.minimum(to_start, to_end).min(axis=1))


def hausdorff_distance(K: IntervalUnion, L: IntervalUnion) -> float:
    """Hausdorff distance; sup_x dist(x, Y) over X is attained at an endpoint of X or at the
    midpoint of a gap of Y lying inside X."""

    def one_sided(X: IntervalUnion, Y: IntervalUnion) -> float:
        mids = bounded_gaps(Y).mean(axis=1) if len(Y) > 1 else np.zeros(0)
        covered = (mids[:, None] >= X.starts[None, :]) & (mids[:, None] <= X.ends[None, :])
        pts = np.concatenate([X.starts, X.ends, mids[covered.any(axis=1)]])
        return float(np.max(_distance_to(Y, pts)))

    return max(one_sided(K, L), one_sided(L, K))


def _next_at_least(lengths: np.ndarray) -> np.ndarray:
    """Index of the first later entry >= lengths[i], or -1."""
    out = np.full(lengths.size, -1, dtype=np.int64)
    stack: list[int] = []
    for i in range(lengths.size - 1, -1, -1):
        while stack and lengths[stack[-1]] < lengths[i]:
            stack.pop()
        if stack:
            out[i] = stack[-1]
        stack.append(i)
    return out


def _bridge_ends(K: IntervalUnion) -> tuple[np.ndarray, np.ndarray]:
    """For each gap U_i, the far end of the bridge at its left and right boundary points.

    Scanning away from U_i the bridge stops at the first gap with length >= l(U_i), or at
    the hull of K.
    """
    lengths = gap_lengths(K)
    n = lengths.size
    right = _next_at_least(lengths)
    left_rev = _next_at_least(lengths[::-1])
    left = np.where(left_rev[::-1] >= 0, n - 1 - left_rev[::-1], -1)
    lo, hi = K.hull
    right_end = np.where(right >= 0, K.ends[np.maximum(right, 0)], hi)
    left_end = np.where(left >= 0, K.starts[np.maximum(left, 0) + 1], lo)
    return left_end, right_end


def bridge(K: IntervalUnion, u: float) -> tuple[float, float]:
    """The bridge C of K at a boundary point u of a bounded gap."""
    gaps = bounded_gaps(K)
    left_end, right_end = _bridge_ends(K)
    at_right = np.flatnonzero(gaps[:, 1] == u)
    if at_right.size:
        i = int(at_right[0])
        return float(u), float(right_end[i])
    at_left = np.flatnonzero(gaps[:, 0] == u)
    if at_left.size:
        i = int(at_left[0])
        return float(left_end[i]), float(u)
    raise ConfigError(f"{u} is not an endpoint of a bounded gap of {K!r}")


@dataclass(frozen=True)
class ThicknessReport:
    tau: float
    u: float | None = None
    bridge: tuple[float, float] | None = None
    gap: tuple[float, float] | None = None

    @property
    def is_infinite(self) -> bool:
        return self.tau == INF

    def to_dict(self) -> dict[str, Any]:
        return {
            "tau": "inf" if self.is_infinite else self.tau,
            "u": self.u,
            "bridge": list(self.bridge) if self.bridge else None,
            "gap": list(self.gap) if self.gap else None,
        }


def thickness(K: IntervalUnion) -> ThicknessReport:
    """inf over gap endpoints u of l(C)/l(U); 0 with an isolated point, inf for an interval."""
    if len(K) == 1:
        return ThicknessReport(INF)
    gaps = bounded_gaps(K)
    points = np.flatnonzero(K.starts == K.ends)
    if points.size:
        i = int(points[0])
        p = float(K.starts[i])
        side = gaps[i] if i < len(gaps) else gaps[i - 1]
        return ThicknessReport(0.0, p, (p, p), (float(side[0]), float(side[1])))
    lengths = gap_lengths(K)
    left_end, right_end = _bridge_ends(K)
    left_ratio = (gaps[:, 0] - left_end) / lengths
    right_ratio = (right_end - gaps[:, 1]) / lengths
    i_left, i_right = int(np.argmin(left_ratio)), int(np.argmin(right_ratio))
    if left_ratio[i_left] <= right_ratio[i_right]:
        i = i_left
        u, C = float(gaps[i, 0]), (float(left_end[i]), float(gaps[i, 0]))
        tau = float(left_ratio[i])
    else:
        i = i_right
        u, C = float(gaps[i, 1]), (float(gaps[i, 1]), float(right_end[i]))
        tau = float(right_ratio[i])
    return ThicknessReport(tau, u, C, (float(gaps[i, 0]), float(gaps[i, 1])))


def thickness_weight(tau: float) -> float:
    """tau / (tau + 1), with the limit 1 at tau = inf."""
    return 1.0 if tau == INF else tau / (tau + 1.0)


@dataclass
class NewhouseReport:
    passed: bool
    gammas: list[float]
    diameters: list[float]
    thicknesses: list[float]
    weight_sum: float
    violations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "gamma": self.gammas,
            "diameter": self.diameters,
            "thickness": ["inf" if t == INF else t for t in self.thicknesses],
            "weight_sum": self.weight_sum,
            "violations": self.violations,
        }


def newhouse_check(sets: Sequence[IntervalUnion]) -> NewhouseReport:
    """Gap conditions in the given order plus sum tau_i/(tau_i + 1) >= 1, up to rounding.

    Passing forces K_1 + ... + K_m to be an interval.
    """
    if len(sets) < 2:
        raise ConfigError("the sum condition needs at least two sets")
    gammas = [gamma(K) for K in sets]
    diams = [diameter(K) for K in sets]
    taus = [thickness(K).tau for K in sets]
    violations = []
    for i in range(len(sets)):
        for j in range(i):
            if gammas[j] > diams[i] * (1.0 + CHECK_TOL):
                violations.append(
                    f"Gamma(K_{j + 1}) = {gammas[j]:.6g} > diam(K_{i + 1}) = {diams[i]:.6g}"
                )
        if i >= 1 and gammas[i] > sum(diams[:i]) * (1.0 + CHECK_TOL):
            terms = " + ".join(f"diam(K_{j + 1})" for j in range(i))
            violations.append(
                f"Gamma(K_{i + 1}) = {gammas[i]:.6g} > {terms} = {sum(diams[:i]):.6g}"
            )
    weight = float(sum(thickness_weight(t) for t in taus))
    if weight < 1.0 - CHECK_TOL:
        violations.append(f"sum tau/(tau + 1) = {weight:.6g} < 1")
    report = NewhouseReport(not violations, gammas, diams, taus, weight, violations)
    if report.passed:
        log.info(f"CANTOR: gap conditions hold for {len(sets)} sets (weight {weight:.4g})")
    else:
        log.info(f"CANTOR: gap conditions fail: {'; '.join(violations)}")
    return report


def coarsen(K: IntervalUnion, eps: float) -> IntervalUnion:
    """Fill every gap shorter than eps."""
    if eps <= 0 or len(K) == 1:
        return K
    return canonicalize(K.intervals, tol=eps)


def _pair_sum(K: IntervalUnion, L: IntervalUnion, cap: int) -> IntervalUnion:
    count = len(K) * len(L)
    if count > cap:
        raise SumsetBlowupError(
            f"sumset needs {count} interval pairs (cap {cap}); coarsen the inputs first"
        )
    a = (K.starts[:, None] + L.starts[None, :]).ravel()
    b = (K.ends[:, None] + L.ends[None, :]).ravel()
    lo, hi = K.hull[0] + L.hull[0], K.hull[1] + L.hull[1]
    return canonicalize(np.column_stack([a, b]), tol=SUM_TOL * max(1.0, abs(lo), abs(hi)))


def sumset(sets: Sequence[IntervalUnion], cap: int = SUMSET_CAP, eps: float = 0.0) -> IntervalUnion:
    """Minkowski sum K_1 + ... + K_m; inputs are coarsened by eps first when eps > 0."""
    if not sets:
        raise ConfigError("sumset of no sets")
    parts = [coarsen(K, eps) for K in sets]
    total = parts[0]
    for K in parts[1:]:
        total = _pair_sum(total, K, cap)
    if len(parts) >= 3:
        other = parts[-1]
        for K in reversed(parts[:-1]):
            other = _pair_sum(other, K, cap)
        check_contract(
            "sumset order independence",
            hausdorff_distance(total, other),
            SUM_TOL * max(1.0, *(abs(x) for x in total.hull)) * len(parts),
        )
    log.info(
        f"CANTOR: sumset of {len(sets)} sets has {len(total)} components"
        + (f" (coarsened by {eps:.3g})" if eps > 0 else "")
    )
    return total


def middle_thirds(level: int, lo: float = 0.0, hi: float = 1.0) -> IntervalUnion:
    """The 2^level intervals left after `level` middle-thirds removals from [lo, hi]."""
    if not 0 <= level <= 24:
        raise ConfigError(f"middle-thirds level must be in 0..24, got {level}")
    words = np.arange(2**level, dtype=np.int64)
    digits = (words[:, None] >> np.arange(level - 1, -1, -1)) & 1
    k = (2 * digits * 3 ** np.arange(level - 1, -1, -1, dtype=np.int64)).sum(axis=1)
    scale = float(3**level)
    starts = lo + (hi - lo) * (k / scale)
    ends = lo + (hi - lo) * ((k + 1) / scale)
    return IntervalUnion(np.column_stack([starts, ends]))


def from_spec(spec: str | Sequence[Sequence[float]]) -> IntervalUnion:
    """A set from a `middle_thirds:<level>` name or a list of [a, b] pairs."""
    if isinstance(spec, str):
        return middle_thirds(cantor_level(spec))
    return canonicalize(spec)
