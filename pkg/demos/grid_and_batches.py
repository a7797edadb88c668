"""From a corpus of estimates to an augmented training batch file.

Builds parameter grids around small per-sequence corpora, emits a PSAB batch
file of four-record groups (one real patch plus synthetic FLASH, T2-SPACE,
and MPRAGE renderings at the same location), and reads it back.
"""

import tempfile
from collections import Counter
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
    approx_intensity,
    build_grid,
    emit_batches,
    enumerate_grid,
    epoch_schedule,
    read_psab,
)

table = TissueTable(
    field_tesla=1.5,
    csf=TissueNMR(rho=1.0, t1=4000.0, t2=2000.0),
    gm=TissueNMR(rho=0.85, t1=1200.0, t2=100.0),
    wm=TissueNMR(rho=0.75, t1=700.0, t2=80.0),
)

corpora = {
    SequenceKind.FLASH: [(-1.0, 900.0, -30.0), (-0.9, 820.0, -27.0),
                         (-1.1, 950.0, -33.0)],
    SequenceKind.T2SPACE: [(0.3, -1e-4, -60.0), (0.25, -1.4e-4, -55.0)],
    SequenceKind.MPRAGE: [(0.1, -9e-4, 8e-8), (0.05, -8e-4, 6e-8)],
}

grids = {}
for kind, rows in corpora.items():
    thetas = [ThetaSet(kind, *row) for row in rows]
    grids[kind] = build_grid(thetas, bins=4)
    g = grids[kind]
    print(f"{kind.value}: bounds " +
          " ".join(f"[{lo:.4g}, {hi:.4g}]" for lo, hi in zip(g.lowers, g.uppers)) +
          f", {g.n_points} grid points")

schedule = epoch_schedule(grids[SequenceKind.FLASH], n_batches=70, seed=0)
unique = len({tuple(t.values) for t in schedule})
print(f"\nepoch schedule: {len(schedule)} slots cover {unique} distinct points "
      f"(all {grids[SequenceKind.FLASH].n_points})")

# one synthetic subject
DIMS = (32, 32, 32)
labels = np.ones(DIMS, dtype=np.int32)
labels[10:] = 2
labels[21:] = 3
rho, t1, t2 = np.ones(DIMS), np.ones(DIMS), np.ones(DIMS)
for label, tissue in ((1, table.csf), (2, table.gm), (3, table.wm)):
    sel = labels == label
    rho[sel], t1[sel], t2[sel] = tissue.rho, tissue.t1, tissue.t2
mprage = approx_intensity(rho, t1, t2, ThetaSet(SequenceKind.MPRAGE, 0.1, -9e-4, 8e-8))
subject = Subject(
    subject_id="demo",
    volume=Volume(mprage / mprage.max(), (1.0, 1.0, 1.0)),
    nmr=NMRMaps(rho=Volume(rho, (1.0, 1.0, 1.0), Intent.NMR_RHO),
                t1=Volume(t1, (1.0, 1.0, 1.0), Intent.NMR_T1),
                t2=Volume(t2, (1.0, 1.0, 1.0), Intent.NMR_T2)),
    labels=Volume(labels, (1.0, 1.0, 1.0), Intent.LABEL),
    mask=BrainMask(np.ones(DIMS, bool)),
)

with tempfile.TemporaryDirectory() as td:
    out = Path(td) / "demo.psab"
    emit_batches([subject], grids, count=16, out_path=out, seed=7,
                 patch_size=(16, 16, 16), label_count=8)
    dims, label_count, records = read_psab(out)
    print(f"\nwrote {len(records)} records of {dims} patches "
          f"({out.stat().st_size} bytes)")
    composition = Counter((r.provenance.name, r.kind.value) for r in records)
    for key, n in sorted(composition.items()):
        print(f"  {key[0]:9s} {key[1]:8s} x{n}")
    group = records[:4]
    assert len({r.labels.tobytes() for r in group}) == 1
    print("first group shares one label patch; synthetic intensities differ:")
    for r in group:
        print(f"  {r.kind.value:8s} {r.provenance.name.lower():9s} "
              f"mean intensity {float(r.intensity.mean()):.4f}")
