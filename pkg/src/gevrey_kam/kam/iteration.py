from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Literal, Sequence

import numpy as np
import pandas as pd

from gevrey_kam.analysis.arithmetic import DiophantineParams, as_frequency
from gevrey_kam.analysis.cocycle import sample_points
from gevrey_kam.analysis.fourier import FourierSeries, GevreyParams
from gevrey_kam.analysis.lie import is_sl2r
from gevrey_kam.config import KamControls
from gevrey_kam.errors import ConfigError, ContractViolation, GevreyKamError
from gevrey_kam.kam.conjugacy import Conjugacy, conjugation_residual
from gevrey_kam.kam.step import StepCase, StepResult, kam_step, numerical_floor

log = logging.getLogger(__name__)

TraceStatus = Literal["almost-reduced", "aborted"]

END_TO_END_TOL = 1e-8
END_TO_END_SAMPLES = 16
STEP_COLUMNS = [
    "step", "case", "r", "r_next", "eps", "eps_next", "window", "n_window", "n_star", "eta",
    "residual", "gate_smallness",
]


def width_schedule(r0: float, r: float, steps: int) -> list[float]:
    """r_0 = r0, r_{j+1} = r_j - (r0 - r~) / 4^{j+1} with r~ = (r0 + r) / 2."""
    r_tilde = (r0 + r) / 2.0
    widths = [r0]
    for j in range(steps):
        widths.append(widths[-1] - (r0 - r_tilde) / 4.0 ** (j + 1))
    return widths


@dataclass(frozen=True)
class StepRecord:
    step: int
    case: StepCase
    r: float
    r_next: float
    eps: float
    eps_next: float
    window: int
    n_window: float
    n_star: tuple[int, ...] | None
    eta: tuple[float, ...]
    residual: float
    gates: dict[str, bool]
    norms: dict[str, float]

    @classmethod
    def of(cls, step: int, r: float, r_next: float, result: StepResult) -> StepRecord:
        return cls(
            step,
            result.case,
            r,
            r_next,
            result.eps,
            result.eps_plus,
            result.window,
            result.n_window,
            result.n_star,
            result.eta,
            result.residual,
            dict(result.gates),
            dict(result.norms),
        )

    def to_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "step": self.step,
            "case": self.case,
            "r": self.r,
            "r_next": self.r_next,
            "eps": self.eps,
            "eps_next": self.eps_next,
            "window": self.window,
            "n_window": self.n_window,
            "n_star": "" if self.n_star is None else " ".join(str(v) for v in self.n_star),
            "eta": " ".join(f"{e:.17g}" for e in self.eta),
            "residual": self.residual,
            "gate_smallness": self.gates.get("smallness", True),
        }
        row.update({f"norm_{k}": v for k, v in self.norms.items()})
        return row

    def to_record(self) -> dict[str, Any]:
        """JSON form; N_j is the resonance window before the mode caps."""
        return {
            "j": self.step,
            "r_j": self.r,
            "eps_j": self.eps,
            "N_j": self.n_window,
            "case": self.case,
            "n_star": None if self.n_star is None else list(self.n_star),
            "norms": dict(self.norms),
            "residual": self.residual,
        }


@dataclass
class KamTrace:
    """Every step of an almost-reducibility run plus the composed conjugacy."""

    alpha: np.ndarray
    A0: np.ndarray
    f0: FourierSeries
    r0: float
    r: float
    B: Conjugacy
    A_final: np.ndarray
    f_final: FourierSeries
    status: TraceStatus = "almost-reduced"
    detail: str = ""
    steps: list[StepRecord] = field(default_factory=list)
    conjugacies: list[Conjugacy] = field(default_factory=list)
    separations: list[dict[str, Any]] = field(default_factory=list)
    end_residual: float = float("nan")

    @property
    def eps_history(self) -> list[float]:
        if not self.steps:
            return []
        return [s.eps for s in self.steps] + [self.steps[-1].eps_next]

    @property
    def resonant_steps(self) -> list[StepRecord]:
        return [s for s in self.steps if s.case == "resonant"]

    @property
    def degree(self) -> tuple[int, ...]:
        return self.B.degree

    def rho_shift(self) -> float:
        """<deg B, alpha>/2, the amount the rotation number drops under B."""
        return float(np.dot(self.degree, self.alpha)) / 2.0

    def decay_holds(self, controls: KamControls) -> bool:
        return all(
            s.eps_next <= max(s.eps**controls.decay_exponent, numerical_floor(s.eps, controls))
            for s in self.steps
        )

    def to_frame(self) -> pd.DataFrame:
        if not self.steps:
            return pd.DataFrame(columns=STEP_COLUMNS)
        return pd.DataFrame([s.to_row() for s in self.steps])

    def to_records(self) -> list[dict[str, Any]]:
        return [s.to_record() for s in self.steps]

    def summary(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "detail": self.detail,
            "steps": len(self.steps),
            "resonant_steps": [list(s.n_star or ()) for s in self.resonant_steps],
            "degree": list(self.degree),
            "eps_history": self.eps_history,
            "end_residual": self.end_residual,
            "A_final": np.asarray(self.A_final).tolist(),
            "separations": self.separations,
        }


def _separation(trace: KamTrace, record: StepRecord, tau: float) -> None:
    """|n_q| >= eps_p^{-1/(22 tau)} |n_p| for consecutive resonant steps p < q."""
    earlier = trace.resonant_steps
    if not earlier or record.n_star is None:
        return
    prev = earlier[-1]
    assert prev.n_star is not None
    n_p = float(np.sum(np.abs(prev.n_star)))
    n_q = float(np.sum(np.abs(record.n_star)))
    bound = prev.eps ** (-1.0 / (22.0 * tau)) * n_p
    entry = {"p": prev.step, "q": record.step, "n_q": n_q, "bound": bound, "ok": n_q >= bound}
    trace.separations.append(entry)
    if not entry["ok"]:
        log.warning(
            f"KAM: resonant steps {prev.step} and {record.step} closer than expected: "
            f"|n_q|={n_q:.0f} < {bound:.3g}"
        )


def almost_reduce(
    A0: np.ndarray,
    f0: FourierSeries,
    alpha: float | Sequence[float],
    p0: GevreyParams,
    r: float,
    dioph: DiophantineParams,
    controls: KamControls | None = None,
    best_effort: bool = False,
    seed: int = 0,
) -> KamTrace:
    """Iterate KAM steps from width p0.r towards r until the perturbation underflows.

    Each step must satisfy eps_{j+1} <= eps_j^{decay_exponent}. A step whose output sits at
    the round-off floor of its own arithmetic ends the run as almost-reduced. With
    `best_effort`, a failing step ends the run with status "aborted" instead of raising.
    """
    controls = controls or KamControls()
    a = as_frequency(alpha)
    dioph.require_dimension(a.size)
    if not 0.0 < r < p0.r:
        raise ConfigError(f"target width must satisfy 0 < r < r0, got r={r}, r0={p0.r}")
    A = np.real(np.asarray(A0, dtype=float))
    if not is_sl2r(A):
        raise ConfigError(f"A0 must lie in SL(2,R), det A0 = {np.linalg.det(A):.12g}")
    f = f0
    trace = KamTrace(a, A, f0, p0.r, r, Conjugacy.identity(a.size), A, f0)
    widths = width_schedule(p0.r, r, controls.max_steps)
    trace.detail = f"stopped after max_steps={controls.max_steps}"

    for j in range(controls.max_steps):
        p = p0.with_width(widths[j])
        if f.gevrey_norm(p) <= controls.underflow:
            trace.detail = f"perturbation below underflow after {j} steps"
            break
        try:
            result = kam_step(A, f, a, p, widths[j + 1], dioph, controls, step=j)
            floor = numerical_floor(result.eps, controls)
            bound = max(result.eps**controls.decay_exponent, floor)
            if not result.eps_plus <= bound:
                raise ContractViolation("eps_{j+1} <= eps_j^decay", result.eps_plus, bound)
        except GevreyKamError as e:
            if not best_effort:
                raise
            trace.status, trace.detail = "aborted", f"step {j}: {type(e).__name__}: {e}"
            log.warning(f"KAM: aborting at step {j}: {e}")
            break
        record = StepRecord.of(j, widths[j], widths[j + 1], result)
        if record.case == "resonant":
            _separation(trace, record, dioph.tau)
        trace.steps.append(record)
        trace.conjugacies.append(result.B)
        trace.B = trace.B @ result.B
        A, f = result.A_plus, result.f_plus
        trace.A_final, trace.f_final = A, f
        if result.eps_plus <= floor:
            trace.detail = f"perturbation at the round-off floor after {j + 1} steps"
            break

    theta = sample_points(a.size, END_TO_END_SAMPLES, seed, trace.B.lattice.period)
    trace.end_residual = conjugation_residual(a, trace.A0, f0, trace.B, A, f, theta=theta)
    log.info(
        f"KAM: {trace.status} after {len(trace.steps)} steps, degree={trace.degree}, "
        f"end-to-end residual={trace.end_residual:.3e}"
    )
    if trace.end_residual > END_TO_END_TOL and trace.status != "aborted":
        raise ContractViolation("end-to-end residual", trace.end_residual, END_TO_END_TOL)
    return trace
