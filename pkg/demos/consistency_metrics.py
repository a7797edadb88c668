"""Multi-acquisition consistency statistics for repeated segmentations.

Fakes three acquisitions of one subject whose segmentations disagree
slightly, then reports per-structure volumes, coefficient of variation, and
signed relative differences.
"""

import numpy as np

from pulsekit import (
    Intent,
    StructureSet,
    Volume,
    coefficient_of_variation,
    dice,
    signed_relative_difference,
    structure_volumes,
)
from pulsekit.metrics import format_consistency_report

rng = np.random.default_rng(0)
DIMS = (32, 32, 32)


def fake_segmentation(jitter: int) -> Volume:
    """Nested boxes for WM/CT/TH with one thalamus face shifted by ``jitter``."""
    data = np.zeros(DIMS, dtype=np.int32)
    data[4:28, 4:28, 4:28] = 2                        # cortex shell
    data[8:24, 8:24, 8:24] = 1                        # white matter
    data[12:20, 12:20, 12:20 + jitter] = 6            # thalamus
    return Volume(data, (1.0, 1.0, 1.0), Intent.LABEL)


acquisitions = {"scanner_a": fake_segmentation(0),
                "scanner_b": fake_segmentation(1),
                "scanner_c": fake_segmentation(-1)}

structures = StructureSet()
per_acq = {name: structure_volumes(seg, structures)
           for name, seg in acquisitions.items()}
rows = {}
for acronym in structures.mapping.values():
    vols = [per_acq[name][acronym] for name in acquisitions]
    if any(v > 0 for v in vols):
        rows[acronym] = vols

print(format_consistency_report(list(acquisitions), rows))

th_volumes = rows["TH"]
print(f"thalamus CoV: {coefficient_of_variation(th_volumes):.2f}%")
print("thalamus signed relative differences:",
      [f"{d:+.2f}%" for d in signed_relative_difference(th_volumes)])

a, b = acquisitions["scanner_a"], acquisitions["scanner_b"]
print("\npairwise Dice scanner_a vs scanner_b:")
for label_id, acronym in structures.items():
    if per_acq["scanner_a"][acronym] > 0:
        print(f"  {acronym}: {dice(a, b, label_id):.4f}")
