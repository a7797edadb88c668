"""Segmentation overlap and multi-acquisition consistency statistics.

Conventions, also stamped into report headers: the coefficient of variation
uses the population standard deviation, and Dice between two empty label
sets is 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateDataError, UsageError
from .volume import Intent, Volume

DEFAULT_STRUCTURES = {
    1: "WM",   # white matter
    2: "CT",   # cortex
    3: "LV",   # lateral ventricle
    4: "CWM",  # cerebellar white matter
    5: "CCT",  # cerebellar cortex
    6: "TH",   # thalamus
    7: "CA",   # caudate
    8: "PU",   # putamen
    9: "PA",   # pallidum
    10: "HI",  # hippocampus
    11: "AM",  # amygdala
    12: "BS",  # brain stem
}


@dataclass(frozen=True)
class StructureSet:
    """Label-id to acronym mapping for the structures under evaluation."""

    mapping: Mapping[int, str] = field(default_factory=lambda: dict(DEFAULT_STRUCTURES))

    def __post_init__(self):
        acronyms = list(self.mapping.values())
        if len(set(acronyms)) != len(acronyms):
            raise UsageError("structure acronyms must be unique")
        object.__setattr__(self, "mapping", dict(self.mapping))

    def items(self):
        return self.mapping.items()


def dice(a: Volume, b: Volume, label: int) -> float:
    """Dice overlap 2|A&B| / (|A|+|B|) of one label; 1.0 when both sets empty."""
    if a.dims != b.dims:
        raise UsageError(f"dims mismatch: {a.dims} vs {b.dims}")
    in_a = a.data == label
    in_b = b.data == label
    na, nb = int(in_a.sum()), int(in_b.sum())
    if na + nb == 0:
        return 1.0
    return 2.0 * int((in_a & in_b).sum()) / (na + nb)


def structure_volumes(seg: Volume, structures: StructureSet | None = None) -> dict[str, float]:
    """Volume in mm^3 per structure; absent labels report 0, not omission."""
    if seg.intent is not Intent.LABEL:
        raise UsageError("structure volumes need a label-intent volume")
    structures = structures or StructureSet()
    voxel_mm3 = float(np.prod(seg.spacing))
    labels, counts = np.unique(seg.data, return_counts=True)
    by_label = dict(zip((int(l) for l in labels), (int(c) for c in counts)))
    return {acr: by_label.get(label_id, 0) * voxel_mm3
            for label_id, acr in structures.items()}


def coefficient_of_variation(volumes: Sequence[float]) -> float:
    """Population-std coefficient of variation across acquisitions, in percent.

    Raises:
        UsageError: fewer than two acquisitions.
        DegenerateDataError: zero mean volume.
    """
    vols = np.asarray(volumes, dtype=float)
    if vols.size < 2:
        raise UsageError("coefficient of variation needs >= 2 acquisitions")
    mean = float(vols.mean())
    if mean <= 0:
        raise DegenerateDataError("mean structure volume is zero")
    return 100.0 * float(vols.std(ddof=0)) / mean


def signed_relative_difference(volumes: Sequence[float]) -> list[float]:
    """Per-acquisition signed volume difference from the mean, in percent."""
    vols = np.asarray(volumes, dtype=float)
    if vols.size < 2:
        raise UsageError("signed relative difference needs >= 2 acquisitions")
    mean = float(vols.mean())
    if mean <= 0:
        raise DegenerateDataError("mean structure volume is zero")
    return [100.0 * (float(v) - mean) / mean for v in vols]


def study_cov(per_subject: Sequence[Sequence[float]]) -> tuple[float, float]:
    """Mean and population std over subjects of per-subject CoV values."""
    covs = np.array([coefficient_of_variation(vols) for vols in per_subject])
    return float(covs.mean()), float(covs.std(ddof=0))


def format_consistency_report(acquisition_names: Sequence[str],
                              rows: Mapping[str, Sequence[float]]) -> str:
    """Tab-separated consistency report: one structure per row.

    Columns: per-acquisition volume (mm^3), coefficient of variation, and
    per-acquisition signed relative difference. Structures whose mean volume
    is zero report empty statistic cells.
    """
    lines = [
        "# coefficient of variation: 100 * population std / mean over acquisitions",
        "# signed relative difference: 100 * (v - mean) / mean per acquisition",
        "\t".join(["structure"]
                  + [f"vol_mm3[{n}]" for n in acquisition_names]
                  + ["cov_percent"]
                  + [f"srd_percent[{n}]" for n in acquisition_names]),
    ]
    for structure, vols in rows.items():
        cells = [structure] + [f"{v:.3f}" for v in vols]
        try:
            cells.append(f"{coefficient_of_variation(vols):.4f}")
            cells.extend(f"{d:+.4f}" for d in signed_relative_difference(vols))
        except DegenerateDataError:
            cells.append("")
            cells.extend("" for _ in vols)
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def write_consistency_report(path: str | Path, acquisition_names: Sequence[str],
                             rows: Mapping[str, Sequence[float]]) -> None:
    Path(path).write_text(format_consistency_report(acquisition_names, rows))


def format_dice_report(labels: Mapping[str, float]) -> str:
    """Tab-separated per-structure Dice table (empty-vs-empty reported as 1.0)."""
    lines = ["# dice between two empty label sets is reported as 1.0",
             "structure\tdice"]
    for structure, value in labels.items():
        lines.append(f"{structure}\t{value:.4f}")
    return "\n".join(lines) + "\n"
