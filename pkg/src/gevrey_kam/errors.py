from __future__ import annotations

from typing import Any


class GevreyKamError(RuntimeError):
    """Base class for every failure raised by the library."""


class ConfigError(GevreyKamError):
    """Experiment configuration failed schema validation."""


class LatticeMismatchError(GevreyKamError):
    pass


class DimensionError(GevreyKamError):
    pass


class PrincipalBranchError(GevreyKamError):
    """Matrix has an eigenvalue on the closed negative real axis."""


class NotEllipticError(GevreyKamError):
    def __init__(self, classification: str, trace: float):
        super().__init__(f"matrix is {classification} (trace {trace:.16g}), elliptic required")
        self.classification = classification
        self.trace = trace


class BCHConvergenceError(GevreyKamError):
    pass


class NonHomotopicError(GevreyKamError):
    def __init__(self, degree: Any):
        super().__init__(f"cocycle is not homotopic to the identity (degree {list(degree)})")
        self.degree = degree


class DegenerateColumnError(GevreyKamError):
    pass


class SmallnessGateError(GevreyKamError):
    def __init__(self, gate: str, value: float, bound: float):
        super().__init__(f"smallness gate '{gate}' failed: {value:.6g} > {bound:.6g}")
        self.gate = gate
        self.value = value
        self.bound = bound


class MultipleResonanceError(GevreyKamError):
    def __init__(self, sites: list[tuple[int, ...]], distances: list[float]):
        super().__init__(f"multiple resonant sites {sites} (distances {distances})")
        self.sites = sites
        self.distances = distances


class EliminationError(GevreyKamError):
    def __init__(self, message: str, last_residual: float):
        super().__init__(f"{message} (last residual {last_residual:.3e})")
        self.last_residual = last_residual


class RotationMismatchError(GevreyKamError):
    pass


class UniformlyHyperbolicError(GevreyKamError):
    pass


class DiophantineError(GevreyKamError):
    pass


class EndgameError(GevreyKamError):
    pass


class SmallDivisorError(GevreyKamError):
    def __init__(self, mode: tuple[int, ...], divisor: float, floor: float):
        super().__init__(f"small divisor {divisor:.3e} < {floor:.3e} at mode {mode}")
        self.mode = mode
        self.divisor = divisor
        self.floor = floor


class FitResidualError(GevreyKamError):
    pass


class WindowOverflowError(GevreyKamError):
    pass


class SumsetBlowupError(GevreyKamError):
    pass


class ContractViolation(GevreyKamError):
    """A measured quantity broke an asserted bound."""

    def __init__(self, contract: str, measured: float, bound: float):
        super().__init__(f"contract '{contract}' violated: {measured:.6g} > {bound:.6g}")
        self.contract = contract
        self.measured = measured
        self.bound = bound


def check_contract(contract: str, measured: float, bound: float) -> None:
    if not measured <= bound:
        raise ContractViolation(contract, float(measured), float(bound))
