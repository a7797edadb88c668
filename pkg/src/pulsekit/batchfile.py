"""PSAB and PSBR binary batch files.

Both formats are little-endian. PSAB carries (intensity, label) training
pairs, PSBR carries (intensity, real-valued target) regression pairs.

PSAB layout:
    magic "PSAB" | version u32 (=1) | record count u64 | patch dims 3*u32 |
    label count u32 | records...
PSBR layout:
    magic "PSBR" | version u32 (=1) | record count u64 | patch dims 3*u32 |
    target kind u8 (0 rho, 1 t1, 2 t2) | records...

Each record:
    subject-id length u16 | subject-id bytes | provenance u8 (0 real,
    1 synthetic) | kind u8 | theta 3*f64 (zeros for real records) |
    corner 3*u32 | intensity patch f32[n] | label patch u16[n] (PSAB) or
    target patch f32[n] (PSBR)

Patch arrays are serialized fastest-axis-first (``ravel(order="F")``),
matching the volume layout. Readers reject unknown magic and versions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from .errors import FormatError, TruncationError, UsageError, ValidationError
from .sequences import SequenceKind, ThetaSet

PSAB_MAGIC = b"PSAB"
PSBR_MAGIC = b"PSBR"
VERSION = 1
DEFAULT_LABEL_COUNT = 41

_KIND_CODES = {
    SequenceKind.FLASH: 0,
    SequenceKind.SPGR: 1,
    SequenceKind.MPRAGE: 2,
    SequenceKind.T2SPACE: 3,
}
_KIND_FROM_CODE = {v: k for k, v in _KIND_CODES.items()}

TARGET_KINDS = ("rho", "t1", "t2")


class Provenance(Enum):
    REAL = 0
    SYNTHETIC = 1


@dataclass
class BatchRecord:
    """One (intensity patch, label patch) training sample with provenance."""

    subject_id: str
    provenance: Provenance
    kind: SequenceKind
    theta: ThetaSet | None
    corner: tuple[int, int, int]
    intensity: np.ndarray  # float32, shape = patch dims
    labels: np.ndarray     # uint16, shape = patch dims

    def __post_init__(self):
        self.intensity = np.asarray(self.intensity, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.uint16)
        if self.intensity.shape != self.labels.shape:
            raise ValidationError("intensity and label patches must share shape")
        if self.intensity.size and (float(self.intensity.min()) < 0.0
                                    or float(self.intensity.max()) > 1.0):
            raise ValidationError("intensity patch values must lie in [0, 1]")
        if self.provenance is Provenance.SYNTHETIC and self.theta is None:
            raise ValidationError("synthetic records must carry theta")

    def __eq__(self, other):
        if not isinstance(other, BatchRecord):
            return NotImplemented
        return (self.subject_id == other.subject_id
                and self.provenance is other.provenance
                and self.kind is other.kind
                and self.theta == other.theta
                and self.corner == other.corner
                and self.intensity.shape == other.intensity.shape
                and np.array_equal(self.intensity, other.intensity)
                and np.array_equal(self.labels, other.labels))


@dataclass
class RegressionRecord:
    """One (intensity patch, NMR target patch) regression sample."""

    subject_id: str
    provenance: Provenance
    kind: SequenceKind
    theta: ThetaSet | None
    corner: tuple[int, int, int]
    intensity: np.ndarray  # float32
    target: np.ndarray     # float32

    def __post_init__(self):
        self.intensity = np.asarray(self.intensity, dtype=np.float32)
        self.target = np.asarray(self.target, dtype=np.float32)
        if self.intensity.shape != self.target.shape:
            raise ValidationError("intensity and target patches must share shape")

    def __eq__(self, other):
        if not isinstance(other, RegressionRecord):
            return NotImplemented
        return (self.subject_id == other.subject_id
                and self.provenance is other.provenance
                and self.kind is other.kind
                and self.theta == other.theta
                and self.corner == other.corner
                and self.intensity.shape == other.intensity.shape
                and np.array_equal(self.intensity, other.intensity)
                and np.array_equal(self.target, other.target))


def _theta_triplet(record) -> tuple[float, float, float]:
    if record.theta is None:
        return (0.0, 0.0, 0.0)
    return (record.theta.theta0, record.theta.theta1, record.theta.theta2)


def _write_record_head(fh: BinaryIO, record, dims: tuple[int, int, int]) -> None:
    if record.intensity.shape != dims:
        raise ValidationError(
            f"record patch shape {record.intensity.shape} does not match header {dims}")
    sid = record.subject_id.encode("utf-8")
    if len(sid) > 0xFFFF:
        raise ValidationError("subject id longer than 65535 bytes")
    fh.write(struct.pack("<H", len(sid)))
    fh.write(sid)
    fh.write(struct.pack("<BB", record.provenance.value, _KIND_CODES[record.kind]))
    fh.write(struct.pack("<3d", *_theta_triplet(record)))
    fh.write(struct.pack("<3I", *record.corner))
    fh.write(np.ascontiguousarray(record.intensity.ravel(order="F")).tobytes())


class PsabWriter:
    """Streaming PSAB writer; patches the record count on close."""

    magic = PSAB_MAGIC

    def __init__(self, path: str | Path, patch_dims: tuple[int, int, int],
                 label_count: int = DEFAULT_LABEL_COUNT):
        self.dims = tuple(int(d) for d in patch_dims)
        self.label_count = int(label_count)
        self.count = 0
        self._fh = open(path, "wb")
        self._fh.write(self.magic)
        self._fh.write(struct.pack("<IQ3I", VERSION, 0, *self.dims))
        self._write_tail_header()

    def _write_tail_header(self):
        self._fh.write(struct.pack("<I", self.label_count))

    def append(self, record: BatchRecord) -> None:
        if record.labels.size and int(record.labels.max()) >= self.label_count:
            raise ValidationError(
                f"label {int(record.labels.max())} outside configured set "
                f"of {self.label_count}")
        _write_record_head(self._fh, record, self.dims)
        self._fh.write(np.ascontiguousarray(record.labels.ravel(order="F")).tobytes())
        self.count += 1

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.seek(len(self.magic) + 4)
        self._fh.write(struct.pack("<Q", self.count))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class PsbrWriter(PsabWriter):
    """Streaming PSBR writer (regression targets instead of labels)."""

    magic = PSBR_MAGIC

    def __init__(self, path: str | Path, patch_dims: tuple[int, int, int],
                 target_kind: str):
        if target_kind not in TARGET_KINDS:
            raise UsageError(f"target kind must be one of {TARGET_KINDS}")
        self.target_kind = target_kind
        super().__init__(path, patch_dims, label_count=0)

    def _write_tail_header(self):
        self._fh.write(struct.pack("<B", TARGET_KINDS.index(self.target_kind)))

    def append(self, record: RegressionRecord) -> None:  # type: ignore[override]
        _write_record_head(self._fh, record, self.dims)
        self._fh.write(np.ascontiguousarray(record.target.ravel(order="F")).tobytes())
        self.count += 1


class _Cursor:
    def __init__(self, raw: bytes, path: str):
        self.raw = raw
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.raw):
            raise TruncationError(
                f"{self.path}: truncated while reading {what} at offset {self.pos}")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _read_header(cur: _Cursor, expected_magic: bytes):
    magic = cur.take(4, "magic")
    if magic != expected_magic:
        raise FormatError(f"{cur.path}: magic {magic!r}, expected {expected_magic!r}")
    version, count, d0, d1, d2 = cur.unpack("<IQ3I", "header")
    if version != VERSION:
        raise FormatError(f"{cur.path}: unsupported version {version} (reader knows {VERSION})")
    return count, (d0, d1, d2)


def _read_record_head(cur: _Cursor, dims, n):
    (sid_len,) = cur.unpack("<H", "subject id length")
    sid = cur.take(sid_len, "subject id").decode("utf-8")
    prov_code, kind_code = cur.unpack("<BB", "provenance/kind")
    try:
        provenance = Provenance(prov_code)
    except ValueError:
        raise FormatError(f"{cur.path}: bad provenance code {prov_code}") from None
    if kind_code not in _KIND_FROM_CODE:
        raise FormatError(f"{cur.path}: bad sequence kind code {kind_code}")
    kind = _KIND_FROM_CODE[kind_code]
    t0, t1, t2 = cur.unpack("<3d", "theta")
    theta = None if provenance is Provenance.REAL else ThetaSet(kind, t0, t1, t2)
    corner = cur.unpack("<3I", "corner")
    intensity = np.frombuffer(cur.take(4 * n, "intensity patch"),
                              dtype="<f4").reshape(dims, order="F")
    return sid, provenance, kind, theta, corner, intensity


def read_psab(path: str | Path):
    """Read an entire PSAB file; returns (patch_dims, label_count, records)."""
    cur = _Cursor(Path(path).read_bytes(), str(path))
    count, dims = _read_header(cur, PSAB_MAGIC)
    (label_count,) = cur.unpack("<I", "label count")
    n = dims[0] * dims[1] * dims[2]
    records = []
    for _ in range(count):
        sid, provenance, kind, theta, corner, intensity = _read_record_head(cur, dims, n)
        labels = np.frombuffer(cur.take(2 * n, "label patch"),
                               dtype="<u2").reshape(dims, order="F")
        records.append(BatchRecord(sid, provenance, kind, theta, corner,
                                   intensity, labels))
    return dims, label_count, records


def read_psab_header(path: str | Path):
    """Header fields only: (record_count, patch_dims, label_count)."""
    with open(path, "rb") as fh:
        cur = _Cursor(fh.read(4 + struct.calcsize("<IQ3I") + 4), str(path))
    count, dims = _read_header(cur, PSAB_MAGIC)
    (label_count,) = cur.unpack("<I", "label count")
    return count, dims, label_count


def iter_psab(path: str | Path) -> Iterator[BatchRecord]:
    _, _, records = read_psab(path)
    yield from records


def read_psbr(path: str | Path):
    """Read an entire PSBR file; returns (patch_dims, target_kind, records)."""
    cur = _Cursor(Path(path).read_bytes(), str(path))
    count, dims = _read_header(cur, PSBR_MAGIC)
    (target_code,) = cur.unpack("<B", "target kind")
    if target_code >= len(TARGET_KINDS):
        raise FormatError(f"{path}: bad target kind code {target_code}")
    n = dims[0] * dims[1] * dims[2]
    records = []
    for _ in range(count):
        sid, provenance, kind, theta, corner, intensity = _read_record_head(cur, dims, n)
        target = np.frombuffer(cur.take(4 * n, "target patch"),
                               dtype="<f4").reshape(dims, order="F")
        records.append(RegressionRecord(sid, provenance, kind, theta, corner,
                                        intensity, target))
    return dims, TARGET_KINDS[target_code], records
