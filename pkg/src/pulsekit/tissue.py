"""Three-class Gaussian mixture fitting on intensity samples and tissue mapping.

EM runs on the raw 1D sample vector with a deterministic quantile
initialization, so a given sample set always produces the same fit. The
variance floor (1e-8 on [0,1]-scaled intensities) keeps components from
going singular on noiseless inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousAssignmentError,
    DegenerateFitError,
    InsufficientDataError,
    ValidationError,
)
from .sequences import SequenceKind

MIN_SAMPLES = 1000
MAX_ITER = 500
REL_TOL = 1e-7
VARIANCE_FLOOR = 1e-8
MIN_WEIGHT = 1e-4
MEAN_SEPARATION = 1e-6  # relative


@dataclass(frozen=True)
class GmmFit:
    """Converged three-component mixture, components in fit order."""

    means: tuple[float, float, float]
    variances: tuple[float, float, float]
    weights: tuple[float, float, float]
    log_likelihood: float
    iterations: int

    def __post_init__(self):
        if abs(sum(self.weights) - 1.0) > 1e-9 or any(w < 0 for w in self.weights):
            raise ValidationError("weights must be non-negative and sum to 1")
        if any(v < VARIANCE_FLOOR * (1 - 1e-12) for v in self.variances):
            raise ValidationError("variance below floor")

    def to_lines(self) -> str:
        lines = ["component mean variance weight"]
        for k in range(3):
            lines.append(f"{k} {self.means[k]!r} {self.variances[k]!r} {self.weights[k]!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ClassMeans:
    """Mean intensities of CSF, GM, and WM."""

    csf: float
    gm: float
    wm: float

    def __post_init__(self):
        vals = (self.csf, self.gm, self.wm)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("class means must be finite")
        for i in range(3):
            for j in range(i + 1, 3):
                if _relative_gap(vals[i], vals[j]) < MEAN_SEPARATION:
                    raise ValidationError("class means not distinct")

    @property
    def values(self) -> np.ndarray:
        """Means in (csf, gm, wm) order, matching design-matrix rows."""
        return np.array([self.csf, self.gm, self.wm])


def _relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale


def fit_gmm3(samples, *, max_iter: int = MAX_ITER, rel_tol: float = REL_TOL) -> GmmFit:
    """EM fit of a three-class Gaussian mixture to 1D intensity samples.

    Initialization is the 25th/50th/75th sample percentiles with a shared
    variance and uniform weights; no randomness is involved. Terminates when
    the relative log-likelihood change drops below ``rel_tol`` or after
    ``max_iter`` iterations.

    Raises:
        InsufficientDataError: fewer than 1000 samples.
        DegenerateFitError: zero spread, or a component weight collapsing
            below 1e-4.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_SAMPLES:
        raise InsufficientDataError(f"need >= {MIN_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DegenerateFitError("samples contain non-finite values")
    if x.max() == x.min():
        raise DegenerateFitError("samples have zero spread")

    means = np.quantile(x, [0.25, 0.5, 0.75])
    # +/-3 sigma of the shared init component spans the sample range
    spread = float(x.max() - x.min())
    variances = np.full(3, max((spread / 6.0) ** 2, VARIANCE_FLOOR))
    weights = np.full(3, 1.0 / 3.0)

    prev_ll = -np.inf
    ll = prev_ll
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # E step in log space
        log_comp = (np.log(weights)
                    - 0.5 * np.log(2.0 * np.pi * variances)
                    - (x[:, None] - means) ** 2 / (2.0 * variances))
        log_norm = np.logaddexp.reduce(log_comp, axis=1)
        ll = float(log_norm.sum())
        # flooring the variances can nudge the likelihood slightly, hence the slack
        assert ll >= prev_ll - 1e-6 * max(1.0, abs(prev_ll)), "EM log-likelihood decreased"
        resp = np.exp(log_comp - log_norm[:, None])

        counts = resp.sum(axis=0)
        if np.any(counts / x.size < MIN_WEIGHT):
            raise DegenerateFitError("mixture component collapsed (weight < 1e-4)")
        means = resp.T @ x / counts
        variances = np.maximum(
            np.einsum("nk,nk->k", resp, (x[:, None] - means) ** 2) / counts,
            VARIANCE_FLOOR)
        weights = counts / x.size

        if prev_ll > -np.inf and abs(ll - prev_ll) <= rel_tol * max(abs(prev_ll), 1e-300):
            break
        prev_ll = ll

    return GmmFit(tuple(means), tuple(variances), tuple(weights), ll, iterations)


def assign_tissues(fit: GmmFit, kind: SequenceKind) -> ClassMeans:
    """Map fitted component means onto CSF/GM/WM by brightness order.

    T1-weighted kinds (FLASH/SPGR/MPRAGE) read ascending means as
    (CSF, GM, WM); T2-SPACE reads them as (WM, GM, CSF).

    Raises:
        AmbiguousAssignmentError: two component means within 1e-6 relative.
    """
    ordered = sorted(fit.means)
    for a, b in zip(ordered, ordered[1:]):
        if _relative_gap(a, b) < MEAN_SEPARATION:
            raise AmbiguousAssignmentError(
                f"component means {a!r} and {b!r} too close to order")
    if kind.t1_weighted:
        csf, gm, wm = ordered
    else:
        wm, gm, csf = ordered
    return ClassMeans(csf=csf, gm=gm, wm=wm)
