"""Variable-flip-angle fitting of proton density and T1, T2 recovery, and
synthetic-contrast generation for regression training data.

The multi-flip-angle fit linearizes the spoiled gradient-echo equation as
y = E1 * x + b with y = S/sin(alpha) and x = S/tan(alpha); the constant
TE decay factor is absorbed into the gain-scaled proton density. Voxels
whose fit leaves the physical branch (E1 outside (0, 1)) are zeroed and
flagged in a validity mask rather than clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .augment import synthesis_norm
from .batchfile import Provenance, PsbrWriter, RegressionRecord, TARGET_KINDS
from .errors import DomainError, UsageError, ValidationError
from .sequences import SequenceKind, ThetaSet, approx_log_intensity
from .volume import BrainMask, Intent, NMRMaps, Volume


@dataclass(frozen=True)
class MefAcquisition:
    """Co-registered multi-flip-angle spoiled gradient-echo images."""

    images: tuple[Volume, ...]
    flip_angles: tuple[float, ...]  # radians
    tr: float  # ms
    te: float  # ms

    def __post_init__(self):
        images = tuple(self.images)
        angles = tuple(float(a) for a in self.flip_angles)
        if len(images) < 2:
            raise UsageError("need at least two flip-angle images")
        if len(angles) != len(images):
            raise UsageError("one flip angle per image required")
        if len(set(angles)) != len(angles):
            raise UsageError("flip angles must be pairwise distinct")
        if any(not (0 < a < math.pi) for a in angles):
            raise ValidationError("flip angles must lie in (0, pi)")
        dims = images[0].dims
        if any(img.dims != dims for img in images):
            raise UsageError("flip-angle images must share dims")
        if self.tr <= 0:
            raise ValidationError("TR must be positive")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "flip_angles", angles)

    @property
    def dims(self):
        return self.images[0].dims


@dataclass(frozen=True)
class RhoT1Fit:
    """Gain-scaled proton density and T1 maps plus the validity mask."""

    g_rho: Volume
    t1: Volume
    valid: BrainMask


def fit_rho_t1(mef: MefAcquisition, mask: BrainMask) -> RhoT1Fit:
    """Per-voxel linear fit of the variable-flip-angle signal model.

    Proton density comes out scaled by the receive gain (and the constant
    echo-decay factor); T1 is absolute in ms. Voxels where the fitted
    recovery factor leaves (0, 1) are zeroed and marked invalid.
    """
    mask.require_match(mef.images[0])
    m = mask.data
    signals = np.stack([img.data[m] for img in mef.images])  # (angles, voxels)
    angles = np.asarray(mef.flip_angles)
    y = signals / np.sin(angles)[:, None]
    x = signals / np.tan(angles)[:, None]

    n = float(len(mef.images))
    sx, sy = x.sum(axis=0), y.sum(axis=0)
    sxx, sxy = (x * x).sum(axis=0), (x * y).sum(axis=0)
    denom = n * sxx - sx * sx
    with np.errstate(divide="ignore", invalid="ignore"):
        e1 = (n * sxy - sx * sy) / denom
        intercept = (sy - e1 * sx) / n
        t1_vals = -mef.tr / np.log(e1)
        grho_vals = intercept / (1.0 - e1)

    ok = (denom != 0) & np.isfinite(e1) & (e1 > 0.0) & (e1 < 1.0)
    ok &= np.isfinite(t1_vals) & np.isfinite(grho_vals)
    # a voxel whose raw signal does not vary with flip angle has no valid fit
    ok &= signals.max(axis=0) > signals.min(axis=0)
    t1_vals = np.where(ok, t1_vals, 0.0)
    grho_vals = np.where(ok, grho_vals, 0.0)

    shape = mef.dims
    t1_map = np.zeros(shape)
    grho_map = np.zeros(shape)
    valid = np.zeros(shape, dtype=bool)
    t1_map[m] = t1_vals
    grho_map[m] = grho_vals
    valid[m] = ok
    template = mef.images[0]
    return RhoT1Fit(
        g_rho=Volume(grho_map, template.spacing, Intent.NMR_RHO, template.orientation),
        t1=Volume(t1_map, template.spacing, Intent.NMR_T1, template.orientation),
        valid=BrainMask(valid),
    )


@dataclass(frozen=True)
class T2Solve:
    t2: Volume
    valid: BrainMask


def solve_t2(s: Volume, rho: Volume, t1: Volume, theta: ThetaSet,
             mask: BrainMask) -> T2Solve:
    """Invert the approximate FLASH equation for T2 at each in-mask voxel.

    T2 = theta2 / (ln S - theta0 - ln rho - theta1 / T1). Voxels with a
    vanishing denominator, non-positive signal, or a non-positive or
    non-finite T2 are zeroed and marked invalid.

    Raises:
        UsageError: non-FLASH-family theta or theta2 == 0.
        DomainError: non-positive rho or T1 inside the mask.
    """
    if not theta.kind.flash_family:
        raise UsageError("T2 recovery requires a FLASH/SPGR parameter set")
    if theta.theta2 == 0.0:
        raise UsageError("theta2 must be nonzero to solve for T2")
    mask.require_match(s)
    m = mask.data
    rho_v, t1_v, s_v = rho.data[m], t1.data[m], s.data[m]
    if np.any(rho_v <= 0) or np.any(t1_v <= 0):
        raise DomainError("rho and T1 must be positive inside the mask")
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.log(np.where(s_v > 0, s_v, np.nan)) - theta.theta0 \
            - np.log(rho_v) - theta.theta1 / t1_v
        t2_vals = theta.theta2 / denom
    ok = np.isfinite(t2_vals) & (t2_vals > 0)
    t2_vals = np.where(ok, t2_vals, 0.0)
    t2_map = np.zeros(s.dims)
    valid = np.zeros(s.dims, dtype=bool)
    t2_map[m] = t2_vals
    valid[m] = ok
    return T2Solve(
        t2=Volume(t2_map, s.spacing, Intent.NMR_T2, s.orientation),
        valid=BrainMask(valid),
    )


def synthesize_gamma_a(nmr: NMRMaps, theta: ThetaSet, mask: BrainMask) -> Volume:
    """Full-volume synthetic contrast under ``theta``, normalized to [0, 1].

    Zero outside the mask; in-mask values divide by the volume-level
    99.9th-percentile intensity and clamp to [0, 1].
    """
    norm = synthesis_norm(nmr, mask, theta)
    m = mask.data
    out = np.zeros(nmr.dims)
    log_s = approx_log_intensity(nmr.rho.data[m], nmr.t1.data[m], nmr.t2.data[m], theta)
    out[m] = np.clip(np.exp(log_s) / norm, 0.0, 1.0)
    return Volume(out, nmr.rho.spacing, Intent.INTENSITY, nmr.rho.orientation)


def export_regression_pairs(synth: Volume, target: Volume, target_kind: str,
                            patch_size: tuple[int, int, int], count: int,
                            seed: int, out_path, *,
                            theta: ThetaSet | None = None,
                            subject_id: str = "subject") -> None:
    """Write (synthetic intensity, NMR target) patch pairs as a PSBR file.

    Corners are drawn uniformly over valid positions from (seed, index), so
    output is deterministic.

    Raises:
        UsageError: count < 1, mismatched dims, or bad target kind.
    """
    if count < 1:
        raise UsageError("count must be >= 1")
    if target_kind not in TARGET_KINDS:
        raise UsageError(f"target kind must be one of {TARGET_KINDS}")
    if synth.dims != target.dims:
        raise UsageError("synthetic and target volumes are not co-registered")
    size = tuple(int(s) for s in patch_size)
    highs = [d - s + 1 for d, s in zip(synth.dims, size)]
    if any(h <= 0 for h in highs):
        raise UsageError(f"patch size {size} exceeds volume dims {synth.dims}")
    kind = theta.kind if theta is not None else SequenceKind.FLASH
    # zeros mean "unspecified" but keep synthetic records round-trippable
    record_theta = theta if theta is not None else ThetaSet(kind, 0.0, 0.0, 0.0)
    with PsbrWriter(out_path, size, target_kind) as writer:
        for i in range(count):
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), i]))
            corner = tuple(int(rng.integers(0, h)) for h in highs)
            slices = tuple(slice(c, c + s) for c, s in zip(corner, size))
            writer.append(RegressionRecord(
                subject_id=subject_id,
                provenance=Provenance.SYNTHETIC,
                kind=kind,
                theta=record_theta,
                corner=corner,
                intensity=np.clip(synth.data[slices], 0.0, 1.0).astype(np.float32),
                target=target.data[slices].astype(np.float32),
            ))
