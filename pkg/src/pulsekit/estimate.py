"""Linear estimation of approximate sequence parameters and field mapping.

The class-mean assumption turns each three-parameter approximation into a
3x3 linear system: one row per tissue, built from table NMR values, with
log class intensity minus log proton density on the right-hand side.
Field-strength mapping chains two such design matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, UsageError, ValidationError
from .linalg import MAX_CONDITION, condition_number, solve_conditioned
from .sequences import SequenceKind, ThetaSet, theta_basis
from .tissue import ClassMeans, GmmFit, assign_tissues, fit_gmm3
from .volume import BrainMask, Volume

TISSUES = ("csf", "gm", "wm")


@dataclass(frozen=True)
class TissueNMR:
    """Mean NMR values of one tissue class."""

    rho: float
    t1: float  # ms
    t2: float  # ms

    def __post_init__(self):
        for name in ("rho", "t1", "t2"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValidationError(f"tissue {name} must be positive and finite")


@dataclass(frozen=True)
class TissueTable:
    """Mean NMR values for CSF/GM/WM at one field strength.

    These numbers are configuration, not ground truth: the packaged defaults
    carry literature-typical values and are meant to be edited per study.
    """

    field_tesla: float
    csf: TissueNMR
    gm: TissueNMR
    wm: TissueNMR

    def __post_init__(self):
        if not math.isfinite(self.field_tesla) or self.field_tesla <= 0:
            raise ValidationError("field strength must be positive")

    @property
    def rho(self) -> np.ndarray:
        return np.array([self.csf.rho, self.gm.rho, self.wm.rho])

    def rows(self):
        return (self.csf, self.gm, self.wm)


def parse_tissue_table(text: str, source: str = "<string>") -> TissueTable:
    """Parse the plain-text table: a field_tesla line plus one line per tissue."""
    field = None
    tissues: dict[str, TissueNMR] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "field_tesla":
            if len(parts) != 2:
                raise UsageError(f"{source}:{lineno}: expected 'field_tesla <value>'")
            field = float(parts[1])
        elif parts[0] in TISSUES:
            if len(parts) != 4:
                raise UsageError(
                    f"{source}:{lineno}: expected '<tissue> rho t1_ms t2_ms'")
            tissues[parts[0]] = TissueNMR(*(float(p) for p in parts[1:]))
        else:
            raise UsageError(f"{source}:{lineno}: unknown record {parts[0]!r}")
    if field is None:
        raise UsageError(f"{source}: missing field_tesla line")
    missing = [t for t in TISSUES if t not in tissues]
    if missing:
        raise UsageError(f"{source}: missing tissue lines for {missing}")
    return TissueTable(field, tissues["csf"], tissues["gm"], tissues["wm"])


def read_tissue_table(path: str | Path) -> TissueTable:
    return parse_tissue_table(Path(path).read_text(), source=str(path))


def format_tissue_table(table: TissueTable) -> str:
    lines = [f"field_tesla {table.field_tesla!r}"]
    for name, t in zip(TISSUES, table.rows()):
        lines.append(f"{name} {t.rho!r} {t.t1!r} {t.t2!r}")
    return "\n".join(lines) + "\n"


def packaged_table(field_tesla: float) -> TissueTable:
    """Load the packaged default table for 1.5 T or 3 T."""
    name = {1.5: "tissue_1p5t.txt", 3.0: "tissue_3t.txt"}.get(float(field_tesla))
    if name is None:
        raise UsageError(f"no packaged tissue table for {field_tesla} T (have 1.5, 3)")
    return read_tissue_table(Path(__file__).parent / "data" / name)


def design_matrix(table: TissueTable, kind: SequenceKind) -> np.ndarray:
    """3x3 matrix with one basis row [1, g1, g2] per tissue (CSF, GM, WM)."""
    rows = []
    for tissue in table.rows():
        g1, g2 = theta_basis(kind, tissue.t1, tissue.t2)
        rows.append([1.0, float(g1), float(g2)])
    return np.array(rows)


def design_condition(table: TissueTable, kind: SequenceKind) -> float:
    return condition_number(design_matrix(table, kind))


def estimate_theta(means: ClassMeans, table: TissueTable, kind: SequenceKind) -> ThetaSet:
    """Solve the three-equation class-mean system for the parameter triple.

    Raises:
        DomainError: non-positive class mean (log undefined).
        ConditioningError: design matrix singular or condition >= 1e8.
    """
    s = means.values
    if np.any(s <= 0):
        raise DomainError(f"class means must be positive, got {s}")
    rhs = np.log(s) - np.log(table.rho)
    matrix = design_matrix(table, kind)
    theta = solve_conditioned(matrix, rhs, context=f"{kind.value} design matrix")
    return ThetaSet(kind, *(float(v) for v in theta))


def class_means_from_volume(volume: Volume, mask: BrainMask,
                            kind: SequenceKind) -> tuple[ClassMeans, GmmFit]:
    """Fit the three-class mixture to positive in-mask intensities."""
    mask.require_match(volume)
    samples = volume.data[mask.data]
    samples = samples[samples > 0]
    fit = fit_gmm3(samples)
    return assign_tissues(fit, kind), fit


def estimate_theta_from_volume(volume: Volume, mask: BrainMask, table: TissueTable,
                               kind: SequenceKind) -> ThetaSet:
    """GMM class means from the in-mask histogram, then the linear solve."""
    means, _ = class_means_from_volume(volume, mask, kind)
    return estimate_theta(means, table, kind)


@dataclass(frozen=True)
class FieldTransform:
    """Linear map between parameter triples estimated at two field strengths."""

    k: np.ndarray  # 3x3
    from_field: float
    to_field: float
    kind: SequenceKind

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        if k.shape != (3, 3):
            raise ValidationError("field transform must be 3x3")
        if not np.isfinite(condition_number(k)):
            raise ValidationError("field transform matrix is singular")
        object.__setattr__(self, "k", k)

    def inverse(self) -> "FieldTransform":
        inv = solve_conditioned(self.k, np.eye(3), max_condition=1e14,
                                context="field transform inverse")
        return FieldTransform(inv, self.to_field, self.from_field, self.kind)


def build_field_transform(table_to: TissueTable, table_from: TissueTable,
                          kind: SequenceKind) -> FieldTransform:
    """Transform parameters native to ``table_from``'s field into ``table_to``'s.

    The matrix K satisfies B_to @ K = B_from, so a triple estimated against
    ``table_from`` becomes usable with ``table_to`` NMR values via K @ theta.
    """
    b_to = design_matrix(table_to, kind)
    b_from = design_matrix(table_from, kind)
    for name, matrix in (("target", b_to), ("source", b_from)):
        cond = condition_number(matrix)
        if not np.isfinite(cond) or cond >= MAX_CONDITION:
            raise UsageError(f"{name} design matrix ill-conditioned ({cond:.3g})")
    k = solve_conditioned(b_to, b_from, context=f"{kind.value} field transform")
    return FieldTransform(k, table_from.field_tesla, table_to.field_tesla, kind)


def field_transform_residual(xf: FieldTransform, table_to: TissueTable,
                             table_from: TissueTable) -> float:
    """Max-abs residual of the defining relation B_to K = B_from."""
    b_to = design_matrix(table_to, xf.kind)
    b_from = design_matrix(table_from, xf.kind)
    return float(np.abs(b_to @ xf.k - b_from).max())


def map_theta(theta: ThetaSet, xf: FieldTransform) -> ThetaSet:
    """Apply the field transform to a parameter triple of the matching kind."""
    if theta.kind is not xf.kind:
        raise UsageError(f"transform is for {xf.kind.value}, theta is {theta.kind.value}")
    mapped = xf.k @ theta.values
    return ThetaSet(theta.kind, *(float(v) for v in mapped))


@dataclass(frozen=True)
class CorpusItem:
    """Per-volume estimation outcome; exactly one of theta/error is set."""

    index: int
    theta: ThetaSet | None
    error: str | None


def estimate_corpus(items, table: TissueTable) -> list[CorpusItem]:
    """Estimate parameters for each (volume, mask, kind); failures don't abort.

    Raises:
        UsageError: empty corpus.
    """
    items = list(items)
    if not items:
        raise UsageError("corpus is empty")
    results = []
    for index, (volume, mask, kind) in enumerate(items):
        try:
            theta = estimate_theta_from_volume(volume, mask, table, kind)
            results.append(CorpusItem(index, theta, None))
        except Exception as exc:  # noqa: BLE001 - per-item isolation is the contract
            results.append(CorpusItem(index, None, f"{type(exc).__name__}: {exc}"))
    return results
