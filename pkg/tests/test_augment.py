"""Patch extraction, contrast synthesis, minibatch assembly, and emission."""

import math

import numpy as np
import pytest

from pulsekit import (
    BrainMask,
    Intent,
    ParamGrid,
    PatchSpec,
    Provenance,
    SequenceKind,
    Subject,
    ThetaSet,
    Volume,
    assemble_minibatch,
    emit_batches,
    epoch_schedule,
    extract_patch,
    synthesis_norm,
    synthesize_patch,
)
from pulsekit.augment import SYNTH_KINDS
from pulsekit.batchfile import read_psab
from pulsekit.errors import BoundsError, CoverageError, UsageError
from pulsekit.volume import NMRMaps

from conftest import SYNTH_TABLE_15, THETA_STARS, nmr_from_labels, slab_labels, three_tissue_phantom


def toy_grids(bins=3):
    spans = {
        SequenceKind.FLASH: ((-1.2, 700.0, -40.0), (-0.8, 1100.0, -20.0)),
        SequenceKind.T2SPACE: ((0.1, -2e-4, -80.0), (0.5, -5e-5, -40.0)),
        SequenceKind.MPRAGE: ((-0.1, -1.1e-3, 4e-8), (0.3, -7e-4, 1.2e-7)),
    }
    return {kind: ParamGrid(kind, lo, hi, bins) for kind, (lo, hi) in spans.items()}


def toy_subject(dims=(24, 24, 24), subject_id="s0"):
    theta = THETA_STARS[SequenceKind.MPRAGE]
    volume, labels, nmr, mask = three_tissue_phantom(theta, SYNTH_TABLE_15, dims=dims)
    peak = volume.data.max()
    scaled = Volume(volume.data / peak, volume.spacing, Intent.INTENSITY)
    return Subject(subject_id, scaled, nmr, labels, mask, kind=SequenceKind.MPRAGE)


class TestExtractPatch:
    def test_full_volume_identity(self):
        data = np.random.default_rng(0).random((8, 8, 8))
        vol = Volume(data, (1.0, 1.0, 1.0))
        out = extract_patch(vol, PatchSpec(size=(8, 8, 8), corner=(0, 0, 0)))
        assert np.array_equal(out, data)

    def test_index_arithmetic_oracle(self):
        dims = (6, 5, 4)
        data = np.arange(math.prod(dims), dtype=float).reshape(dims)
        vol = Volume(data, (1.0, 1.0, 1.0))
        out = extract_patch(vol, PatchSpec(size=(2, 2, 2), corner=(1, 0, 0)))
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    assert out[i, j, k] == data[1 + i, j, k]

    def test_out_of_bounds(self):
        vol = Volume(np.zeros((4, 4, 4)), (1.0, 1.0, 1.0))
        with pytest.raises(BoundsError):
            extract_patch(vol, PatchSpec(size=(2, 2, 2), corner=(3, 0, 0)))


class TestSynthesizePatch:
    def test_rho_passthrough(self):
        rho = np.full((3, 3, 3), 0.6)
        ones = np.ones((3, 3, 3))
        theta = ThetaSet(SequenceKind.FLASH, 0.0, 0.0, 0.0)
        out = synthesize_patch((rho, ones, ones), theta, norm=1.0)
        assert np.allclose(out, 0.6)

    def test_uniform_patch_uniform_output(self):
        theta = THETA_STARS[SequenceKind.FLASH]
        rho = np.full((3, 3, 3), 0.8)
        t1 = np.full((3, 3, 3), 900.0)
        t2 = np.full((3, 3, 3), 85.0)
        from pulsekit import approx_intensity
        expected = approx_intensity(0.8, 900.0, 85.0, theta) / 2.0
        out = synthesize_patch((rho, t1, t2), theta, norm=2.0)
        assert np.allclose(out, min(expected, 1.0))

    def test_two_tissue_log_gap(self):
        # theta chosen so the WM/GM log-intensity gap is exactly 0.3
        t1_gm, t1_wm = 1200.0, 700.0
        gap = 1.0 / t1_wm - 1.0 / t1_gm
        theta = ThetaSet(SequenceKind.FLASH, 0.0, 0.3 / gap, 0.0)
        labels = np.zeros((4, 4, 4), dtype=np.int32)
        labels[2:] = 1
        rho = np.ones((4, 4, 4))
        t1 = np.where(labels == 0, t1_gm, t1_wm)
        t2 = np.full((4, 4, 4), 80.0)
        out = synthesize_patch((rho, t1, t2), theta, norm=10.0)
        ratio = out[labels == 1][0] / out[labels == 0][0]
        assert abs(ratio - math.exp(0.3)) < 1e-6

    def test_zero_outside_mask(self):
        rho = np.ones((3, 3, 3))
        mask = np.zeros((3, 3, 3), dtype=bool)
        mask[1, 1, 1] = True
        theta = ThetaSet(SequenceKind.FLASH, 0.0, 0.0, 0.0)
        out = synthesize_patch((rho, rho, rho), theta, norm=1.0, mask_patch=mask)
        assert out[1, 1, 1] == 1.0
        assert out.sum() == 1.0


class TestSynthesisNorm:
    def test_uniform_volume(self):
        dims = (8, 8, 8)
        labels = np.full(dims, 2, dtype=np.int32)
        nmr = nmr_from_labels(labels, SYNTH_TABLE_15)
        mask = BrainMask(np.ones(dims, dtype=bool))
        theta = THETA_STARS[SequenceKind.FLASH]
        from pulsekit import approx_intensity
        t = SYNTH_TABLE_15.gm
        expected = approx_intensity(t.rho, t.t1, t.t2, theta)
        assert math.isclose(synthesis_norm(nmr, mask, theta), expected, rel_tol=1e-12)

    def test_rho_scaling_linearity(self):
        dims = (8, 8, 8)
        labels = slab_labels(dims)
        nmr = nmr_from_labels(labels, SYNTH_TABLE_15)
        mask = BrainMask(np.ones(dims, dtype=bool))
        theta = THETA_STARS[SequenceKind.FLASH]
        base = synthesis_norm(nmr, mask, theta)
        c = 4.25
        scaled_nmr = NMRMaps(
            rho=Volume(nmr.rho.data * c, nmr.rho.spacing, Intent.NMR_RHO),
            t1=nmr.t1, t2=nmr.t2)
        assert math.isclose(synthesis_norm(scaled_nmr, mask, theta), c * base,
                            rel_tol=1e-12)

    def test_matches_sort_oracle(self):
        dims = (10, 10, 10)
        labels = slab_labels(dims)
        nmr = nmr_from_labels(labels, SYNTH_TABLE_15)
        mask = BrainMask(np.ones(dims, dtype=bool))
        theta = THETA_STARS[SequenceKind.FLASH]
        from pulsekit import approx_intensity
        vals = sorted(approx_intensity(nmr.rho.data, nmr.t1.data, nmr.t2.data,
                                       theta).ravel().tolist())
        n = len(vals)
        expected = vals[math.ceil(0.999 * n) - 1]
        assert math.isclose(synthesis_norm(nmr, mask, theta), expected, rel_tol=1e-12)


class TestAssembleMinibatch:
    def test_composition_and_shared_labels(self):
        subject = toy_subject()
        spec = PatchSpec(size=(8, 8, 8), corner=(4, 4, 4))
        records = assemble_minibatch(subject, toy_grids(), spec, seed=7)
        assert len(records) == 4
        assert {r.kind for r in records if r.provenance is Provenance.SYNTHETIC} \
            == set(SYNTH_KINDS)
        assert sum(r.provenance is Provenance.REAL for r in records) == 1
        ref = records[0].labels.tobytes()
        assert all(r.labels.tobytes() == ref for r in records)
        assert all(r.corner == (4, 4, 4) for r in records)

    def test_deterministic(self):
        subject = toy_subject()
        spec = PatchSpec(size=(8, 8, 8), corner=(0, 0, 0))
        a = assemble_minibatch(subject, toy_grids(), spec, seed=3)
        b = assemble_minibatch(subject, toy_grids(), spec, seed=3)
        assert a == b

    def test_theta_from_grids(self):
        subject = toy_subject()
        spec = PatchSpec(size=(8, 8, 8), corner=(0, 0, 0))
        grids = toy_grids()
        records = assemble_minibatch(subject, grids, spec, seed=11)
        from pulsekit import enumerate_grid
        for record in records[1:]:
            points = {tuple(p.values) for p in enumerate_grid(grids[record.kind])}
            assert tuple(record.theta.values) in points

    def test_different_theta_different_patch(self):
        subject = toy_subject()
        spec = PatchSpec(size=(12, 12, 12), corner=(6, 6, 6))
        a = assemble_minibatch(subject, toy_grids(), spec, seed=1)
        b = assemble_minibatch(subject, toy_grids(), spec, seed=2)
        for ra, rb in zip(a[1:], b[1:]):
            if ra.theta != rb.theta:
                assert np.abs(ra.intensity - rb.intensity).mean() > 0

    def test_missing_grid_rejected(self):
        subject = toy_subject()
        grids = toy_grids()
        del grids[SequenceKind.MPRAGE]
        with pytest.raises(UsageError):
            assemble_minibatch(subject, grids, PatchSpec(size=(8, 8, 8)), seed=0)


class TestEpochSchedule:
    def grid(self, bins=2):
        return ParamGrid(SequenceKind.FLASH, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), bins)

    def test_tight_coverage_is_permutation(self):
        sched = epoch_schedule(self.grid(), 8, seed=0)
        assert len(sched) == 8
        assert len({tuple(t.values) for t in sched}) == 8

    def test_fill_keeps_coverage(self):
        sched = epoch_schedule(self.grid(), 10, seed=1)
        assert len(sched) == 10
        assert len({tuple(t.values) for t in sched}) == 8

    def test_insufficient_batches(self):
        with pytest.raises(CoverageError):
            epoch_schedule(self.grid(), 7, seed=0)

    def test_deterministic(self):
        assert epoch_schedule(self.grid(), 12, seed=9) == epoch_schedule(self.grid(), 12, seed=9)


class TestEmitBatches:
    def test_roundtrip_small(self, tmp_path):
        subject = toy_subject()
        path = tmp_path / "out.psab"
        emit_batches([subject], toy_grids(), 4, path, seed=0,
                     patch_size=(8, 8, 8), label_count=8)
        dims, label_count, records = read_psab(path)
        assert dims == (8, 8, 8)
        assert len(records) == 4
        kinds = [r.kind for r in records if r.provenance is Provenance.SYNTHETIC]
        assert set(kinds) == set(SYNTH_KINDS)

    def test_determinism_across_runs_and_threads(self, tmp_path):
        subject = toy_subject()
        paths = [tmp_path / f"out{i}.psab" for i in range(3)]
        emit_batches([subject], toy_grids(), 24, paths[0], seed=5,
                     patch_size=(8, 8, 8), label_count=8, threads=1)
        emit_batches([subject], toy_grids(), 24, paths[1], seed=5,
                     patch_size=(8, 8, 8), label_count=8, threads=1)
        emit_batches([subject], toy_grids(), 24, paths[2], seed=5,
                     patch_size=(8, 8, 8), label_count=8, threads=4)
        raw = [p.read_bytes() for p in paths]
        assert raw[0] == raw[1] == raw[2]

    def test_subjects_cycle_round_robin(self, tmp_path):
        subjects = [toy_subject(subject_id="s0"), toy_subject(subject_id="s1")]
        path = tmp_path / "out.psab"
        emit_batches(subjects, toy_grids(), 16, path, seed=2,
                     patch_size=(8, 8, 8), label_count=8)
        _, _, records = read_psab(path)
        ids = [r.subject_id for r in records]
        assert ids == ["s0"] * 4 + ["s1"] * 4 + ["s0"] * 4 + ["s1"] * 4

    def test_corner_coverage(self, tmp_path):
        subject = toy_subject(dims=(12, 12, 12))
        path = tmp_path / "out.psab"
        emit_batches([subject], toy_grids(), 400, path, seed=3,
                     patch_size=(8, 8, 8), label_count=8)
        _, _, records = read_psab(path)
        corners = np.array([r.corner for r in records])
        # valid corner range is [0, 4] per axis; both extremes must appear
        assert corners.min() == 0
        assert corners.max() == 4

    def test_count_must_be_group_multiple(self, tmp_path):
        with pytest.raises(UsageError):
            emit_batches([toy_subject()], toy_grids(), 5, tmp_path / "x.psab", seed=0,
                         patch_size=(8, 8, 8))

    def test_intensity_in_unit_interval(self, tmp_path):
        subject = toy_subject()
        path = tmp_path / "out.psab"
        emit_batches([subject], toy_grids(), 8, path, seed=4,
                     patch_size=(8, 8, 8), label_count=8)
        _, _, records = read_psab(path)
        for r in records:
            assert r.intensity.min() >= 0.0
            assert r.intensity.max() <= 1.0
