"""Theoretical and three-parameter approximate pulse-sequence signal models.

All relaxation times are in milliseconds and logs are natural throughout.
T2* is identified with T2; transverse decay beyond T2 is assumed removed by
upstream inhomogeneity correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DomainError, FitError, UsageError, ValidationError
from .linalg import lstsq_normal


def _decimal(x: float) -> str:
    """Shortest round-trip digits in positional (non-exponent) notation."""
    return format(Decimal(repr(float(x))), "f")


class SequenceKind(Enum):
    FLASH = "flash"
    SPGR = "spgr"
    MPRAGE = "mprage"
    T2SPACE = "t2space"

    @property
    def t1_weighted(self) -> bool:
        return self is not SequenceKind.T2SPACE

    @property
    def flash_family(self) -> bool:
        """SPGR shares the FLASH approximation."""
        return self in (SequenceKind.FLASH, SequenceKind.SPGR)

    @classmethod
    def parse(cls, name: str) -> "SequenceKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise UsageError(f"unknown sequence kind {name!r} "
                             f"(expected one of {[k.value for k in cls]})") from None


@dataclass(frozen=True)
class ThetaSet:
    """The three approximate acquisition parameters of one pulse sequence."""

    kind: SequenceKind
    theta0: float
    theta1: float
    theta2: float

    def __post_init__(self):
        for name in ("theta0", "theta1", "theta2"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    @property
    def values(self) -> np.ndarray:
        return np.array([self.theta0, self.theta1, self.theta2])

    def to_line(self) -> str:
        return (f"{self.kind.value} {_decimal(self.theta0)} "
                f"{_decimal(self.theta1)} {_decimal(self.theta2)}")


def parse_theta_line(line: str) -> ThetaSet:
    parts = line.split()
    if len(parts) != 4:
        raise UsageError(f"theta record needs 'kind t0 t1 t2', got {line!r}")
    kind = SequenceKind.parse(parts[0])
    try:
        t0, t1, t2 = (float(p) for p in parts[1:])
    except ValueError as exc:
        raise UsageError(f"bad theta value in {line!r}: {exc}") from None
    return ThetaSet(kind, t0, t1, t2)


def read_theta_file(path: str | Path) -> list[ThetaSet]:
    thetas = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            thetas.append(parse_theta_line(line))
    if not thetas:
        raise UsageError(f"no theta records in {path}")
    return thetas


def write_theta_file(thetas: list[ThetaSet], path: str | Path) -> None:
    Path(path).write_text("".join(t.to_line() + "\n" for t in thetas))


@dataclass(frozen=True)
class TheoreticalFlashParams:
    """Physical FLASH/SPGR acquisition parameters."""

    gain: float
    tr: float  # ms
    te: float  # ms
    alpha: float  # radians

    def __post_init__(self):
        if self.gain <= 0:
            raise ValidationError("gain must be positive")
        if not (self.tr > self.te >= 0):
            raise ValidationError("need TR > TE >= 0")
        if not (0 < self.alpha < math.pi):
            raise ValidationError("flip angle must lie in (0, pi)")


@dataclass(frozen=True)
class TheoreticalT2SpaceParams:
    """Turbo-spin-echo parameters for the n-th echo intensity."""

    gain: float
    td: float   # ms, gap between last echo and TR
    te_n: float  # ms, n-th echo time
    f: float = 1.0  # first-order recovery factor, near 1

    def __post_init__(self):
        if self.gain <= 0:
            raise ValidationError("gain must be positive")
        if self.td <= 0 or self.te_n <= 0:
            raise ValidationError("need TD > 0 and TE_n > 0")


def flash_theoretical(rho, t1, t2star, params: TheoreticalFlashParams):
    """Closed-form FLASH/SPGR signal; accepts scalars or arrays."""
    rho = np.asarray(rho, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    t2star = np.asarray(t2star, dtype=float)
    if np.any(t1 <= 0) or np.any(t2star <= 0):
        raise DomainError("relaxation times must be positive")
    e1 = np.exp(-params.tr / t1)
    recovery = (1.0 - e1) / (1.0 - math.cos(params.alpha) * e1)
    out = params.gain * rho * math.sin(params.alpha) * recovery * np.exp(-params.te / t2star)
    return out if out.ndim else float(out)


def t2space_theoretical(rho, t1, t2, params: TheoreticalT2SpaceParams):
    """Turbo-spin-echo n-th echo signal; accepts scalars or arrays."""
    rho = np.asarray(rho, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if np.any(t1 <= 0) or np.any(t2 <= 0):
        raise DomainError("relaxation times must be positive")
    recovery = 1.0 - params.f * np.exp(-params.td / t1)
    if np.any(recovery <= 0):
        raise DomainError("recovery term non-positive; TD too short for this F")
    out = params.gain * rho * recovery * np.exp(-params.te_n / t2)
    return out if out.ndim else float(out)


def theta_basis(kind: SequenceKind, t1, t2):
    """The two T1/T2 basis terms the approximation is linear in.

    FLASH/SPGR: (1/T1, 1/T2); MPRAGE: (T1, T1^2); T2-SPACE: (T1, 1/T2).
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if kind.flash_family:
        return 1.0 / t1, 1.0 / t2
    if kind is SequenceKind.MPRAGE:
        return t1, t1 * t1
    return t1, 1.0 / t2


def approx_log_intensity(rho, t1, t2, theta: ThetaSet):
    """Log intensity of the three-parameter approximate imaging equation."""
    rho = np.asarray(rho, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if np.any(rho <= 0) or np.any(t1 <= 0) or np.any(t2 <= 0):
        raise DomainError("rho, t1, t2 must be positive")
    g1, g2 = theta_basis(theta.kind, t1, t2)
    out = theta.theta0 + np.log(rho) + theta.theta1 * g1 + theta.theta2 * g2
    return out if out.ndim else float(out)


def approx_intensity(rho, t1, t2, theta: ThetaSet):
    """Exponentiated form of approx_log_intensity."""
    out = np.exp(approx_log_intensity(rho, t1, t2, theta))
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Fit of the approximate T1 term to the theoretical one
# ---------------------------------------------------------------------------

def theoretical_t1_term(kind: SequenceKind, params, t1):
    """The theoretical log-signal contribution of T1 for supported kinds.

    FLASH/SPGR: ln((1 - e^(-TR/T1)) / (1 - cos(alpha) e^(-TR/T1)));
    T2-SPACE: ln(1 - F e^(-TD/T1)). MPRAGE has no closed form here.
    """
    t1 = np.asarray(t1, dtype=float)
    if np.any(t1 <= 0):
        raise DomainError("t1 must be positive")
    if kind.flash_family:
        if not isinstance(params, TheoreticalFlashParams):
            raise UsageError("FLASH/SPGR needs TheoreticalFlashParams")
        e1 = np.exp(-params.tr / t1)
        return np.log((1.0 - e1) / (1.0 - math.cos(params.alpha) * e1))
    if kind is SequenceKind.T2SPACE:
        if not isinstance(params, TheoreticalT2SpaceParams):
            raise UsageError("T2-SPACE needs TheoreticalT2SpaceParams")
        recovery = 1.0 - params.f * np.exp(-params.td / t1)
        if np.any(recovery <= 0):
            raise DomainError("recovery term non-positive; TD too short for this F")
        return np.log(recovery)
    raise UsageError("MPRAGE has no implemented theoretical T1 term")


@dataclass(frozen=True)
class T1TermFit:
    """Least-squares fit of the approximate T1 term against theory."""

    kind: SequenceKind
    intercept: float
    slope: float  # coefficient of 1/T1 (FLASH/SPGR) or T1 (T2-SPACE)
    max_rel_error: float

    def evaluate(self, t1):
        t1 = np.asarray(t1, dtype=float)
        g1 = 1.0 / t1 if self.kind.flash_family else t1
        out = self.intercept + self.slope * g1
        return out if out.ndim else float(out)


def fit_approximation_to_theory(kind: SequenceKind, params, t1_range: tuple[float, float],
                                n_samples: int = 256) -> T1TermFit:
    """Fit the approximation's T1 term to the theoretical one over a T1 range.

    Samples ``n_samples`` points uniformly on ``t1_range``, solves the
    unweighted least-squares problem for intercept and slope, and reports the
    maximum relative error over the samples.

    Raises:
        UsageError: unsupported kind or fewer samples than unknowns.
        FitError: singular normal equations (degenerate range).
    """
    lo, hi = t1_range
    if not (0 < lo <= hi) or not math.isfinite(hi):
        raise UsageError(f"t1_range must lie in (0, inf), got {t1_range}")
    if n_samples < 2:
        raise UsageError("need at least as many samples as the 2 unknowns")
    t1 = np.linspace(lo, hi, n_samples)
    target = theoretical_t1_term(kind, params, t1)
    g1 = 1.0 / t1 if kind.flash_family else t1
    basis = np.column_stack([np.ones_like(t1), g1])
    if lo == hi:
        raise FitError("degenerate t1_range: all samples identical")
    coef = lstsq_normal(basis, target, context="T1-term fit")
    fitted = basis @ coef
    rel = np.abs(fitted - target) / np.maximum(np.abs(target), 1e-12)
    return T1TermFit(kind, float(coef[0]), float(coef[1]), float(rel.max()))
