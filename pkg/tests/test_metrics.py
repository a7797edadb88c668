"""Dice, coefficient of variation, signed relative difference, and reports."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsekit import (
    Intent,
    StructureSet,
    Volume,
    coefficient_of_variation,
    dice,
    signed_relative_difference,
    structure_volumes,
)
from pulsekit.errors import DegenerateDataError, UsageError
from pulsekit.metrics import format_consistency_report, study_cov


def label_volume(data, spacing=(1.0, 1.0, 1.0)):
    return Volume(np.asarray(data, dtype=np.int32), spacing, Intent.LABEL)


class TestDice:
    def test_identity(self):
        a = label_volume(np.ones((4, 4, 4)))
        assert dice(a, a, 1) == 1.0

    def test_disjoint(self):
        a = np.zeros((4, 4, 4))
        b = np.zeros((4, 4, 4))
        a[:2] = 1
        b[2:] = 1
        assert dice(label_volume(a), label_volume(b), 1) == 0.0

    def test_hand_counted_overlap(self):
        # |A| = 8, |B| = 8, overlap 4 -> dice 0.5
        a = np.zeros((4, 4, 4))
        b = np.zeros((4, 4, 4))
        a[0, 0, :4] = 1
        a[0, 1, :4] = 1
        b[0, 1, :4] = 1
        b[0, 2, :4] = 1
        assert dice(label_volume(a), label_volume(b), 1) == 0.5

    def test_both_empty_is_one(self):
        a = label_volume(np.zeros((3, 3, 3)))
        assert dice(a, a, 7) == 1.0

    def test_dims_mismatch(self):
        with pytest.raises(UsageError):
            dice(label_volume(np.zeros((3, 3, 3))),
                 label_volume(np.zeros((4, 4, 4))), 1)

    def test_symmetry_and_relabel_invariance(self):
        rng = np.random.default_rng(0)
        a = label_volume(rng.integers(0, 4, (6, 6, 6)))
        b = label_volume(rng.integers(0, 4, (6, 6, 6)))
        for label in range(4):
            assert dice(a, b, label) == dice(b, a, label)
        remap = {0: 5, 1: 9, 2: 7, 3: 2}
        ra = label_volume(np.vectorize(remap.get)(a.data))
        rb = label_volume(np.vectorize(remap.get)(b.data))
        for label in range(4):
            assert dice(a, b, label) == dice(ra, rb, remap[label])


class TestStructureVolumes:
    def test_count_times_voxel_volume(self):
        data = np.zeros((5, 5, 5))
        data.ravel()[:10] = 1  # WM
        vols = structure_volumes(label_volume(data))
        assert vols["WM"] == 10.0

    def test_spacing_scales_volume(self):
        data = np.zeros((5, 5, 5))
        data.ravel()[:10] = 1
        vols = structure_volumes(label_volume(data, spacing=(2.0, 2.0, 2.0)))
        assert vols["WM"] == 80.0

    def test_absent_labels_reported_zero(self):
        vols = structure_volumes(label_volume(np.zeros((3, 3, 3))))
        assert set(vols) == set(StructureSet().mapping.values())
        assert all(v == 0.0 for v in vols.values())

    def test_needs_label_intent(self):
        with pytest.raises(UsageError):
            structure_volumes(Volume(np.zeros((3, 3, 3)), (1.0, 1.0, 1.0)))


class TestCov:
    def test_identical_is_zero(self):
        assert coefficient_of_variation([50.0, 50.0, 50.0]) == 0.0

    def test_two_point_hand_formula(self):
        # sigma = 10 (population), mu = 100 -> 10%
        assert abs(coefficient_of_variation([90.0, 110.0]) - 10.0) < 1e-12

    def test_single_acquisition_rejected(self):
        with pytest.raises(UsageError):
            coefficient_of_variation([100.0])

    def test_zero_mean_degenerate(self):
        with pytest.raises(DegenerateDataError):
            coefficient_of_variation([0.0, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(1.0, 1e6), min_size=2, max_size=8),
           st.floats(0.1, 100.0))
    def test_scale_invariance(self, volumes, c):
        base = coefficient_of_variation(volumes)
        scaled = coefficient_of_variation([c * v for v in volumes])
        assert abs(base - scaled) < 1e-9 * max(1.0, base)

    def test_study_level(self):
        mean, std = study_cov([[90.0, 110.0], [100.0, 100.0]])
        assert abs(mean - 5.0) < 1e-12
        assert abs(std - 5.0) < 1e-12


class TestSignedRelativeDifference:
    def test_equal_volumes_all_zero(self):
        assert signed_relative_difference([42.0, 42.0, 42.0]) == [0.0, 0.0, 0.0]

    def test_hand_case(self):
        assert signed_relative_difference([90.0, 110.0]) == [-10.0, 10.0]

    def test_zero_sum(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            vols = rng.uniform(10.0, 1000.0, size=rng.integers(2, 7))
            diffs = signed_relative_difference(vols.tolist())
            assert abs(sum(diffs)) < 1e-9


class TestReport:
    def test_identical_segmentations_zero_cov(self):
        rows = {"WM": [100.0, 100.0], "CT": [55.0, 55.0]}
        text = format_consistency_report(["a", "b"], rows)
        lines = [l for l in text.splitlines() if not l.startswith("#")]
        assert "cov_percent" in lines[0]
        for line in lines[1:]:
            cells = line.split("\t")
            assert cells[3] == "0.0000"

    def test_degenerate_rows_emit_empty_cells(self):
        text = format_consistency_report(["a", "b"], {"WM": [0.0, 0.0]})
        line = [l for l in text.splitlines() if l.startswith("WM")][0]
        assert line.split("\t")[3] == ""

    def test_mentions_population_convention(self):
        text = format_consistency_report(["a", "b"], {"WM": [1.0, 2.0]})
        assert "population" in text
