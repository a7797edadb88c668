"""Patch extraction, synthetic contrast generation, and batch emission.

A training group holds four records at one corner of one subject: the real
acquired patch plus synthetic FLASH, T2-SPACE, and MPRAGE patches rendered
from the subject's NMR maps, all sharing the identical label patch. Record
generation derives every random draw from (seed, group index), so output
files are byte-identical regardless of thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .batchfile import (
    DEFAULT_LABEL_COUNT,
    BatchRecord,
    Provenance,
    PsabWriter,
)
from .errors import (
    BoundsError,
    CoverageError,
    DegenerateIntensityError,
    PulsekitError,
    UsageError,
    ValidationError,
)
from .grid import ParamGrid, sample_uniform
from .sequences import SequenceKind, ThetaSet, approx_log_intensity, theta_basis
from .volume import BrainMask, Intent, NMRMaps, Volume, empirical_percentile

SYNTH_KINDS = (SequenceKind.FLASH, SequenceKind.T2SPACE, SequenceKind.MPRAGE)
GROUP_SIZE = 1 + len(SYNTH_KINDS)
NORM_PERCENTILE = 99.9


@dataclass(frozen=True)
class PatchSpec:
    """Axis-aligned patch location: corner voxel indices plus size."""

    size: tuple[int, int, int] = (96, 96, 96)
    corner: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        if any(s <= 0 for s in self.size):
            raise ValidationError(f"patch size must be positive, got {self.size}")
        if any(c < 0 for c in self.corner):
            raise ValidationError(f"patch corner must be non-negative, got {self.corner}")

    def slices(self) -> tuple[slice, slice, slice]:
        return tuple(slice(c, c + s) for c, s in zip(self.corner, self.size))

    def check_within(self, dims: tuple[int, int, int]) -> None:
        for axis, (c, s, d) in enumerate(zip(self.corner, self.size, dims)):
            if c + s > d:
                raise BoundsError(
                    f"axis {axis}: corner {c} + size {s} exceeds dim {d}")


@dataclass(frozen=True)
class Subject:
    """Co-registered acquisition, NMR maps, labels, and mask for one subject."""

    subject_id: str
    volume: Volume
    nmr: NMRMaps
    labels: Volume
    mask: BrainMask
    kind: SequenceKind = SequenceKind.MPRAGE

    def __post_init__(self):
        dims = self.volume.dims
        if self.nmr.dims != dims or self.labels.dims != dims or self.mask.dims != dims:
            raise UsageError("subject volumes are not co-registered (dims differ)")
        if self.labels.intent is not Intent.LABEL:
            raise UsageError("labels volume must have label intent")


def extract_patch(volume: Volume, spec: PatchSpec) -> np.ndarray:
    """Copy the axis-aligned subvolume selected by ``spec``."""
    spec.check_within(volume.dims)
    return volume.data[spec.slices()].copy()


def synthesis_norm(nmr: NMRMaps, mask: BrainMask, theta: ThetaSet) -> float:
    """Volume-level normalizer: the in-mask 99.9th-percentile intensity.

    Computed once per (subject, theta) pair and reused for every patch of
    that pair, so patch statistics stay spatially consistent.

    Raises:
        DegenerateIntensityError: normalizer is zero or non-finite.
    """
    mask.require_match(nmr.rho)
    nmr.require_positive(mask)
    m = mask.data
    log_s = approx_log_intensity(nmr.rho.data[m], nmr.t1.data[m], nmr.t2.data[m], theta)
    norm = float(np.exp(empirical_percentile(log_s, NORM_PERCENTILE)))
    if norm <= 0.0 or not np.isfinite(norm):
        raise DegenerateIntensityError(f"degenerate synthesis norm {norm}")
    return norm


def synthesize_patch(nmr_patch: tuple[np.ndarray, np.ndarray, np.ndarray],
                     theta: ThetaSet, norm: float,
                     mask_patch: np.ndarray | None = None) -> np.ndarray:
    """Render one synthetic-contrast patch from NMR patch values.

    Output is float32, clamped to [0, 1], and zero outside the mask.

    Raises:
        UsageError: non-positive norm.
    """
    if norm <= 0:
        raise UsageError(f"norm must be positive, got {norm}")
    rho, t1, t2 = (np.asarray(p, dtype=float) for p in nmr_patch)
    if mask_patch is None:
        mask_patch = np.ones(rho.shape, dtype=bool)
    out = np.zeros(rho.shape, dtype=np.float32)
    m = np.asarray(mask_patch, dtype=bool)
    if m.any():
        log_s = approx_log_intensity(rho[m], t1[m], t2[m], theta)
        out[m] = np.clip(np.exp(log_s) / norm, 0.0, 1.0)
    return out


class _SubjectContext:
    """Precomputed per-subject vectors so each theta draw costs one percentile."""

    def __init__(self, subject: Subject):
        subject.mask.require_match(subject.nmr.rho)
        subject.nmr.require_positive(subject.mask)
        self.subject = subject
        m = subject.mask.data
        self.log_rho = np.log(subject.nmr.rho.data[m])
        self.basis = {
            kind: theta_basis(kind, subject.nmr.t1.data[m], subject.nmr.t2.data[m])
            for kind in SYNTH_KINDS
        }

    def norm(self, theta: ThetaSet) -> float:
        g1, g2 = self.basis[theta.kind]
        log_s = theta.theta0 + self.log_rho + theta.theta1 * g1 + theta.theta2 * g2
        norm = float(np.exp(empirical_percentile(log_s, NORM_PERCENTILE)))
        if norm <= 0.0 or not np.isfinite(norm):
            raise DegenerateIntensityError(f"degenerate synthesis norm {norm}")
        return norm


def _group_records(ctx: _SubjectContext, grids: Mapping[SequenceKind, ParamGrid],
                   spec: PatchSpec, seed_entropy: Sequence[int]) -> list[BatchRecord]:
    subject = ctx.subject
    spec.check_within(subject.volume.dims)
    label_patch = extract_patch(subject.labels, spec).astype(np.uint16)
    mask_patch = subject.mask.data[spec.slices()]
    nmr_patch = (extract_patch(subject.nmr.rho, spec),
                 extract_patch(subject.nmr.t1, spec),
                 extract_patch(subject.nmr.t2, spec))

    real = BatchRecord(
        subject_id=subject.subject_id,
        provenance=Provenance.REAL,
        kind=subject.kind,
        theta=None,
        corner=spec.corner,
        intensity=np.clip(extract_patch(subject.volume, spec), 0.0, 1.0).astype(np.float32),
        labels=label_patch,
    )
    records = [real]
    for kind in SYNTH_KINDS:
        if kind not in grids:
            raise UsageError(f"no parameter grid supplied for {kind.value}")
        theta = sample_uniform(
            grids[kind], np.random.SeedSequence(list(seed_entropy) + [len(records)]))
        patch = synthesize_patch(nmr_patch, theta, ctx.norm(theta), mask_patch)
        records.append(BatchRecord(
            subject_id=subject.subject_id,
            provenance=Provenance.SYNTHETIC,
            kind=kind,
            theta=theta,
            corner=spec.corner,
            intensity=patch,
            labels=label_patch,
        ))
    return records


def assemble_minibatch(subject: Subject, grids: Mapping[SequenceKind, ParamGrid],
                       spec: PatchSpec, seed: int) -> list[BatchRecord]:
    """Build one four-record group at a fixed corner.

    Returns the real patch plus synthetic FLASH, T2-SPACE, and MPRAGE
    patches, all mapped to one identical label patch.
    """
    return _group_records(_SubjectContext(subject), grids, spec, [int(seed)])


def epoch_schedule(grid: ParamGrid, n_batches: int, seed: int) -> list[ThetaSet]:
    """Theta assignment for one epoch: every grid point at least once.

    With ``n_batches`` above the point count, the surplus slots are drawn
    uniformly; the combined sequence is shuffled. Deterministic per seed.

    Raises:
        CoverageError: n_batches below the number of grid points.
    """
    total = grid.n_points
    if n_batches < total:
        raise CoverageError(
            f"n_batches={n_batches} cannot cover {total} grid points; "
            "raise n_batches or lower bins")
    rng = np.random.default_rng(seed)
    flat = np.concatenate([
        rng.permutation(total),
        rng.integers(0, total, size=n_batches - total),
    ])
    rng.shuffle(flat)
    b = grid.bins
    out = []
    for idx in flat:
        i, rem = divmod(int(idx), b * b)
        j, k = divmod(rem, b)
        out.append(grid.point(i, j, k))
    return out


def _random_corner(rng: np.random.Generator, dims, size, mask: BrainMask,
                   min_mask_fraction: float) -> tuple[int, int, int]:
    highs = [d - s + 1 for d, s in zip(dims, size)]
    if any(h <= 0 for h in highs):
        raise UsageError(f"patch size {size} exceeds volume dims {dims}")
    patch_voxels = size[0] * size[1] * size[2]
    for _ in range(64):
        corner = tuple(int(rng.integers(0, h)) for h in highs)
        if min_mask_fraction <= 0.0:
            return corner
        spec = PatchSpec(size=tuple(size), corner=corner)
        frac = float(mask.data[spec.slices()].sum()) / patch_voxels
        if frac >= min_mask_fraction:
            return corner
    raise UsageError(
        f"no corner with mask fraction >= {min_mask_fraction} found in 64 draws")


def emit_batches(subjects: Sequence[Subject], grids: Mapping[SequenceKind, ParamGrid],
                 count: int, out_path: str | Path, seed: int, *,
                 patch_size: tuple[int, int, int] = (96, 96, 96),
                 label_count: int = DEFAULT_LABEL_COUNT,
                 threads: int = 1,
                 min_mask_fraction: float = 0.0) -> None:
    """Write ``count`` records (``count``/4 four-record groups) to a PSAB file.

    Groups cycle subjects round-robin; each group gets a random corner within
    valid bounds. All draws derive from (seed, group index), so files are
    byte-identical across runs and thread counts.

    Raises:
        UsageError: count not a positive multiple of 4, or no subjects.
    """
    subjects = list(subjects)
    if not subjects:
        raise UsageError("need at least one subject")
    if count <= 0 or count % GROUP_SIZE != 0:
        raise UsageError(f"count must be a positive multiple of {GROUP_SIZE}, got {count}")
    n_groups = count // GROUP_SIZE
    contexts = [_SubjectContext(s) for s in subjects]
    size = tuple(int(s) for s in patch_size)

    def build_group(g: int) -> list[BatchRecord]:
        ctx = contexts[g % len(contexts)]
        subject = ctx.subject
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), g]))
        corner = _random_corner(rng, subject.volume.dims, size, subject.mask,
                                min_mask_fraction)
        spec = PatchSpec(size=size, corner=corner)
        try:
            return _group_records(ctx, grids, spec, [int(seed), g, 7])
        except PulsekitError as exc:
            raise type(exc)(f"group {g} (subject {subject.subject_id!r}): {exc}") from exc

    with PsabWriter(out_path, size, label_count) as writer:
        if threads <= 1:
            for g in range(n_groups):
                for record in build_group(g):
                    writer.append(record)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for group in pool.map(build_group, range(n_groups), chunksize=4):
                    for record in group:
                        writer.append(record)
