"""Generate PSAB fixtures for the trainer using the pulsekit pipeline.

Produces, under trainer/fixtures/:
  train_16.psab   - augmented 16^3 training groups over a 5-phantom family
  eval_mprage.psab - one full-volume record per phantom, training contrast
  eval_flash.psab  - one full-volume record per phantom, a FLASH contrast
                     far from the training one (strong T2 weighting)
  golden_tiny.psab - 2 tiny hand-pinned records for byte-level reader tests

Everything is seeded; reruns are byte-identical.
"""

from pathlib import Path

import numpy as np

from pulsekit import (
    BrainMask,
    Intent,
    NMRMaps,
    SequenceKind,
    Subject,
    ThetaSet,
    TissueNMR,
    TissueTable,
    Volume,
    build_grid,
    emit_batches,
    export_regression_pairs,
    synthesize_gamma_a,
)
from pulsekit.batchfile import BatchRecord, Provenance, PsabWriter

OUT = Path(__file__).resolve().parent.parent / "fixtures"
DIMS = (32, 32, 32)
LABELS = 4  # background, csf, gm, wm

TABLE = TissueTable(
    field_tesla=1.5,
    csf=TissueNMR(rho=1.0, t1=4000.0, t2=2000.0),
    gm=TissueNMR(rho=0.85, t1=1200.0, t2=100.0),
    wm=TissueNMR(rho=0.75, t1=700.0, t2=80.0),
)

THETA_TRAIN = ThetaSet(SequenceKind.MPRAGE, 0.1, -9e-4, 8e-8)
# strong T2 weighting: tissue order inverts relative to the training contrast
THETA_EVAL_FLASH = ThetaSet(SequenceKind.FLASH, 0.0, 150.0, -55.0)


def phantom_labels(index: int) -> np.ndarray:
    """Nested-ellipsoid phantom; geometry varies per family member."""
    rng = np.random.default_rng(1000 + index)
    center = 16.0 + rng.uniform(-2.0, 2.0, 3)
    radii = np.array([13.0, 9.5, 5.5])[:, None] * rng.uniform(0.85, 1.1, (3, 3))
    coords = np.stack(np.meshgrid(*[np.arange(n) for n in DIMS], indexing="ij"))
    labels = np.zeros(DIMS, dtype=np.int32)
    for level, label in enumerate((1, 2, 3)):  # csf shell, gm shell, wm core
        d = sum(((coords[a] - center[a]) / radii[level, a]) ** 2 for a in range(3))
        labels[d <= 1.0] = label
    return labels


def build_subject(index: int) -> Subject:
    labels = phantom_labels(index)
    rho = np.ones(DIMS)
    t1 = np.ones(DIMS)
    t2 = np.ones(DIMS)
    for label, tissue in ((1, TABLE.csf), (2, TABLE.gm), (3, TABLE.wm)):
        sel = labels == label
        rho[sel], t1[sel], t2[sel] = tissue.rho, tissue.t1, tissue.t2
    nmr = NMRMaps(rho=Volume(rho, (1.0, 1.0, 1.0), Intent.NMR_RHO),
                  t1=Volume(t1, (1.0, 1.0, 1.0), Intent.NMR_T1),
                  t2=Volume(t2, (1.0, 1.0, 1.0), Intent.NMR_T2))
    mask = BrainMask(labels > 0)
    volume = synthesize_gamma_a(nmr, THETA_TRAIN, mask)
    return Subject(f"phantom{index}", volume, nmr,
                   Volume(labels, (1.0, 1.0, 1.0), Intent.LABEL), mask,
                   kind=SequenceKind.MPRAGE)


def make_grids():
    # corpora span mild-to-strong weightings so augmentation sees contrasts
    # on both sides of the evaluation settings
    flash = [ThetaSet(SequenceKind.FLASH, t0, t1, t2)
             for t0, t1, t2 in ((-0.5, 120.0, -60.0), (0.2, 900.0, -25.0),
                                (-0.2, 400.0, -45.0))]
    t2space = [ThetaSet(SequenceKind.T2SPACE, t0, t1, t2)
               for t0, t1, t2 in ((0.3, -1e-4, -60.0), (0.1, -2e-4, -40.0))]
    mprage = [ThetaSet(SequenceKind.MPRAGE, t0, t1, t2)
              for t0, t1, t2 in ((0.1, -9e-4, 8e-8), (0.0, -7e-4, 5e-8))]
    return {
        SequenceKind.FLASH: build_grid(flash, bins=4),
        SequenceKind.T2SPACE: build_grid(t2space, bins=4),
        SequenceKind.MPRAGE: build_grid(mprage, bins=4),
    }


def write_eval_volumes(subjects):
    flash_path = OUT / "eval_flash.psab"
    mprage_path = OUT / "eval_mprage.psab"
    with PsabWriter(flash_path, DIMS, LABELS) as wf, \
            PsabWriter(mprage_path, DIMS, LABELS) as wm:
        for subject in subjects:
            labels = subject.labels.data.astype(np.uint16)
            flash_vol = synthesize_gamma_a(subject.nmr, THETA_EVAL_FLASH, subject.mask)
            wf.append(BatchRecord(
                subject_id=subject.subject_id, provenance=Provenance.SYNTHETIC,
                kind=SequenceKind.FLASH, theta=THETA_EVAL_FLASH, corner=(0, 0, 0),
                intensity=flash_vol.data.astype(np.float32), labels=labels))
            wm.append(BatchRecord(
                subject_id=subject.subject_id, provenance=Provenance.REAL,
                kind=SequenceKind.MPRAGE, theta=None, corner=(0, 0, 0),
                intensity=subject.volume.data.astype(np.float32), labels=labels))


def write_golden_tiny():
    dims = (2, 2, 2)
    intensity = np.linspace(0.0, 0.875, 8, dtype=np.float32).reshape(dims, order="F")
    labels = np.arange(8, dtype=np.uint16).reshape(dims, order="F") % 4
    theta = ThetaSet(SequenceKind.T2SPACE, 0.25, -0.5, -62.5)
    with PsabWriter(OUT / "golden_tiny.psab", dims, LABELS) as writer:
        writer.append(BatchRecord("tiny", Provenance.SYNTHETIC, SequenceKind.T2SPACE,
                                  theta, (1, 2, 3), intensity, labels))
        writer.append(BatchRecord("tiny", Provenance.REAL, SequenceKind.MPRAGE,
                                  None, (0, 0, 0), intensity[::-1].copy(), labels))


def main():
    OUT.mkdir(exist_ok=True)
    subjects = [build_subject(i) for i in range(5)]
    grids = make_grids()
    emit_batches(subjects, grids, count=48, out_path=OUT / "train_16.psab",
                 seed=0, patch_size=(16, 16, 16), label_count=LABELS,
                 min_mask_fraction=0.3)
    write_eval_volumes(subjects)
    export_regression_pairs(subjects[0].volume, subjects[0].nmr.t1, "t1",
                            (8, 8, 8), count=3, seed=5,
                            out_path=OUT / "pairs_t1.psbr", theta=THETA_TRAIN,
                            subject_id=subjects[0].subject_id)
    write_golden_tiny()
    for name in ("train_16.psab", "eval_flash.psab", "eval_mprage.psab",
                 "pairs_t1.psbr", "golden_tiny.psab"):
        size = (OUT / name).stat().st_size
        print(f"{name}: {size} bytes")


if __name__ == "__main__":
    main()
