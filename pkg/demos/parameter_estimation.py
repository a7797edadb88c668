"""Recover acquisition parameters from image intensities alone.

Builds a noiseless three-tissue phantom per sequence kind, fits the
three-class mixture to its histogram, solves the linear class-mean system,
and compares against the generating parameters.
"""

import numpy as np

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
    estimate_theta_from_volume,
)

table = TissueTable(
    field_tesla=1.5,
    csf=TissueNMR(rho=1.0, t1=4000.0, t2=2000.0),
    gm=TissueNMR(rho=0.85, t1=1200.0, t2=100.0),
    wm=TissueNMR(rho=0.75, t1=700.0, t2=80.0),
)

generators = {
    SequenceKind.FLASH: ThetaSet(SequenceKind.FLASH, -1.0, 900.0, -30.0),
    SequenceKind.SPGR: ThetaSet(SequenceKind.SPGR, -0.8, 800.0, -25.0),
    SequenceKind.MPRAGE: ThetaSet(SequenceKind.MPRAGE, 0.1, -9e-4, 8e-8),
    SequenceKind.T2SPACE: ThetaSet(SequenceKind.T2SPACE, 0.3, -1e-4, -60.0),
}

DIMS = (48, 48, 48)


def build_phantom(theta):
    labels = np.ones(DIMS, dtype=np.int32)
    labels[DIMS[0] // 3:] = 2
    labels[2 * DIMS[0] // 3:] = 3
    rho = np.ones(DIMS)
    t1 = np.ones(DIMS)
    t2 = np.ones(DIMS)
    for label, tissue in ((1, table.csf), (2, table.gm), (3, table.wm)):
        sel = labels == label
        rho[sel], t1[sel], t2[sel] = tissue.rho, tissue.t1, tissue.t2
    signal = approx_intensity(rho, t1, t2, theta)
    return Volume(signal, (1.0, 1.0, 1.0)), BrainMask(np.ones(DIMS, bool))


print(f"{'kind':9s} {'component':>9s} {'generator':>14s} {'recovered':>14s} {'rel err':>10s}")
for kind, theta_star in generators.items():
    volume, mask = build_phantom(theta_star)
    recovered = estimate_theta_from_volume(volume, mask, table, kind)
    for m, (a, b) in enumerate(zip(theta_star.values, recovered.values)):
        rel = abs(b - a) / abs(a)
        print(f"{kind.value:9s} {'theta' + str(m):>9s} {a:14.6g} {b:14.6g} {rel:10.2e}")
print("\nEstimation needs only the image histogram and a tissue NMR table;"
      " no scanner metadata is read.")
