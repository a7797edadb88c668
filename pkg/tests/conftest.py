"""Shared synthetic fixtures: tissue tables, parameter sets, and phantoms."""

from __future__ import annotations

import numpy as np
import pytest

from pulsekit import (
    BrainMask,
    Intent,
    NMRMaps,
    SequenceKind,
    ThetaSet,
    TissueNMR,
    TissueTable,
    Volume,
    approx_intensity,
)

# Synthetic tables; deliberately not the packaged literature values.
SYNTH_TABLE_15 = TissueTable(
    field_tesla=1.5,
    csf=TissueNMR(rho=1.0, t1=4000.0, t2=2000.0),
    gm=TissueNMR(rho=0.85, t1=1200.0, t2=100.0),
    wm=TissueNMR(rho=0.75, t1=700.0, t2=80.0),
)
SYNTH_TABLE_3 = TissueTable(
    field_tesla=3.0,
    csf=TissueNMR(rho=1.0, t1=4400.0, t2=1700.0),
    gm=TissueNMR(rho=0.85, t1=1400.0, t2=90.0),
    wm=TissueNMR(rho=0.75, t1=850.0, t2=70.0),
)

# Parameter sets chosen so each phantom shows the tissue brightness order
# its sequence family expects (verified by construction in three_tissue_phantom).
THETA_STARS = {
    SequenceKind.FLASH: ThetaSet(SequenceKind.FLASH, -1.0, 900.0, -30.0),
    SequenceKind.SPGR: ThetaSet(SequenceKind.SPGR, -0.8, 800.0, -25.0),
    SequenceKind.MPRAGE: ThetaSet(SequenceKind.MPRAGE, 0.1, -9e-4, 8e-8),
    SequenceKind.T2SPACE: ThetaSet(SequenceKind.T2SPACE, 0.3, -1e-4, -60.0),
}

CSF, GM, WM = 1, 2, 3


def slab_labels(dims) -> np.ndarray:
    """Three axis-0 slabs labeled CSF/GM/WM."""
    labels = np.full(dims, CSF, dtype=np.int32)
    labels[dims[0] // 3:] = GM
    labels[2 * dims[0] // 3:] = WM
    return labels


def nmr_from_labels(labels: np.ndarray, table: TissueTable,
                    spacing=(1.0, 1.0, 1.0)) -> NMRMaps:
    tissues = {CSF: table.csf, GM: table.gm, WM: table.wm}
    rho = np.ones(labels.shape)
    t1 = np.ones(labels.shape)
    t2 = np.ones(labels.shape)
    for label, tissue in tissues.items():
        sel = labels == label
        rho[sel] = tissue.rho
        t1[sel] = tissue.t1
        t2[sel] = tissue.t2
    return NMRMaps(
        rho=Volume(rho, spacing, Intent.NMR_RHO),
        t1=Volume(t1, spacing, Intent.NMR_T1),
        t2=Volume(t2, spacing, Intent.NMR_T2),
    )


def three_tissue_phantom(theta: ThetaSet, table: TissueTable, dims=(64, 64, 64)):
    """Noiseless phantom: labels, NMR maps, the synthesized volume, full mask.

    Asserts the construction premise that the three class intensities are
    distinct and ordered the way the sequence family expects.
    """
    labels = slab_labels(dims)
    nmr = nmr_from_labels(labels, table)
    intensities = {
        label: approx_intensity(t.rho, t.t1, t.t2, theta)
        for label, t in ((CSF, table.csf), (GM, table.gm), (WM, table.wm))
    }
    ordered = (intensities[CSF], intensities[GM], intensities[WM])
    if theta.kind.t1_weighted:
        assert ordered[0] < ordered[1] < ordered[2], "phantom must be T1-w ordered"
    else:
        assert ordered[2] < ordered[1] < ordered[0], "phantom must be T2-w ordered"
    gaps = [abs(a - b) / max(abs(a), abs(b)) for a, b in
            zip(sorted(ordered), sorted(ordered)[1:])]
    assert min(gaps) > 0.02, "phantom class intensities too close for a stable GMM"

    signal = approx_intensity(nmr.rho.data, nmr.t1.data, nmr.t2.data, theta)
    volume = Volume(signal, (1.0, 1.0, 1.0), Intent.INTENSITY)
    label_volume = Volume(labels, (1.0, 1.0, 1.0), Intent.LABEL)
    mask = BrainMask(np.ones(dims, dtype=bool))
    return volume, label_volume, nmr, mask


@pytest.fixture
def synth_table():
    return SYNTH_TABLE_15


@pytest.fixture
def synth_table_3t():
    return SYNTH_TABLE_3
