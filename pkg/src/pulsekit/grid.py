"""Per-sequence 3D parameter grids built from corpus estimates.

Bounds expand each dimension outward by 20% of the endpoint magnitude so
negative-valued estimates stay inside (the naive [0.8*min, 1.2*max] rule
flips order for negative minima; it remains available behind a flag for
strictly positive corpora). Grid points sit at bin centers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import UsageError, ValidationError
from .sequences import SequenceKind, ThetaSet

DEFAULT_BINS = 50


@dataclass(frozen=True)
class ParamGrid:
    """Uniform bin-center grid over the three approximate parameters."""

    kind: SequenceKind
    lowers: tuple[float, float, float]
    uppers: tuple[float, float, float]
    bins: int = DEFAULT_BINS

    def __post_init__(self):
        if self.bins < 2:
            raise UsageError(f"bins must be >= 2, got {self.bins}")
        for m, (lo, hi) in enumerate(zip(self.lowers, self.uppers)):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValidationError(f"dimension {m}: need lower < upper, got [{lo}, {hi}]")

    @property
    def n_points(self) -> int:
        return self.bins ** 3

    def centers(self, dim: int) -> np.ndarray:
        lo, hi = self.lowers[dim], self.uppers[dim]
        width = (hi - lo) / self.bins
        return lo + (np.arange(self.bins) + 0.5) * width

    def point(self, i: int, j: int, k: int) -> ThetaSet:
        return ThetaSet(self.kind,
                        float(self.centers(0)[i]),
                        float(self.centers(1)[j]),
                        float(self.centers(2)[k]))

    def contains(self, theta: ThetaSet) -> bool:
        return all(lo <= v <= hi for lo, hi, v
                   in zip(self.lowers, self.uppers, theta.values))


def build_grid(thetas: Sequence[ThetaSet], bins: int = DEFAULT_BINS, *,
               literal_bounds: bool = False) -> ParamGrid:
    """Bound each dimension of a corpus of same-kind estimates.

    Default rule per dimension: [min - 0.2|min|, max + 0.2|max|]; a
    degenerate dimension (all estimates equal, value 0) widens to +/-1e-6.
    With ``literal_bounds`` the rule is [0.8*min, 1.2*max] and rejects
    corpora where that flips the interval.

    Raises:
        UsageError: empty corpus, mixed kinds, bins < 2, or invalid literal bounds.
    """
    thetas = list(thetas)
    if not thetas:
        raise UsageError("no parameter estimates to grid")
    kind = thetas[0].kind
    if any(t.kind is not kind for t in thetas):
        raise UsageError("grid corpus mixes sequence kinds")
    stacked = np.array([t.values for t in thetas])
    lowers, uppers = [], []
    for m in range(3):
        lo, hi = float(stacked[:, m].min()), float(stacked[:, m].max())
        if literal_bounds:
            lo_b, hi_b = 0.8 * lo, 1.2 * hi
            if not (lo_b < hi_b and lo_b <= lo and hi <= hi_b):
                raise UsageError(
                    f"dimension {m}: literal bounds [{lo_b}, {hi_b}] exclude the "
                    "corpus; literal_bounds requires a positive corpus")
        else:
            lo_b, hi_b = lo - 0.2 * abs(lo), hi + 0.2 * abs(hi)
            if lo_b == hi_b:
                half = max(1e-6, 0.2 * abs(lo))
                lo_b, hi_b = lo - half, hi + half
        lowers.append(lo_b)
        uppers.append(hi_b)
    grid = ParamGrid(kind, tuple(lowers), tuple(uppers), bins)
    for t in thetas:
        if not grid.contains(t):
            raise ValidationError(f"estimate {t} falls outside the built grid")
    return grid


def sample_uniform(grid: ParamGrid, rng_seed) -> ThetaSet:
    """Uniformly pick one grid point; deterministic for a given seed."""
    rng = np.random.default_rng(rng_seed)
    i, j, k = rng.integers(0, grid.bins, size=3)
    return grid.point(int(i), int(j), int(k))


def enumerate_grid(grid: ParamGrid) -> Iterator[ThetaSet]:
    """All bins^3 points in lexicographic index order."""
    for i in range(grid.bins):
        for j in range(grid.bins):
            for k in range(grid.bins):
                yield grid.point(i, j, k)


def write_grid_file(grid: ParamGrid, path: str | Path) -> None:
    lines = [f"kind {grid.kind.value}", f"bins {grid.bins}"]
    for m in range(3):
        lines.append(f"dim{m} {grid.lowers[m]!r} {grid.uppers[m]!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_file(path: str | Path) -> ParamGrid:
    kind = None
    bins = None
    lowers = [None, None, None]
    uppers = [None, None, None]
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "kind" and len(parts) == 2:
            kind = SequenceKind.parse(parts[1])
        elif parts[0] == "bins" and len(parts) == 2:
            bins = int(parts[1])
        elif parts[0] in ("dim0", "dim1", "dim2") and len(parts) == 3:
            m = int(parts[0][3])
            lowers[m] = float(parts[1])
            uppers[m] = float(parts[2])
        else:
            raise UsageError(f"{path}:{lineno}: bad grid record {line!r}")
    if kind is None or bins is None or None in lowers or None in uppers:
        raise UsageError(f"{path}: incomplete grid file")
    return ParamGrid(kind, tuple(lowers), tuple(uppers), bins)
