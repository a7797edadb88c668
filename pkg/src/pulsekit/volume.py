"""Volume carrier, NIfTI-1 subset I/O, conforming, and intensity standardization.

The NIfTI support is deliberately narrow: single-file uncompressed 3D images
with datatype uint8, int16, or float32, little-endian. Anything else is
rejected loudly with the byte offset of the offending field. Orientation
fields are carried through read/write verbatim but never used for resampling;
volumes are treated as axis-aligned.

Voxel data lives in an array of shape ``dims`` with axis 0 fastest on disk
(the NIfTI convention), i.e. files hold ``data.ravel(order="F")``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateIntensityError,
    FormatError,
    TruncationError,
    UnsupportedDatatypeError,
    UsageError,
    ValidationError,
)

HEADER_SIZE = 348
MIN_VOX_OFFSET = 352
MAGIC = b"n+1\x00"

# NIfTI-1 datatype codes in the supported subset.
DT_UINT8 = 2
DT_INT16 = 4
DT_FLOAT32 = 16
_DTYPES = {
    DT_UINT8: np.dtype("<u1"),
    DT_INT16: np.dtype("<i2"),
    DT_FLOAT32: np.dtype("<f4"),
}

# Byte range of the orientation block (qform_code through srow_z) that is
# propagated verbatim and otherwise ignored.
_ORIENT_START = 252
_ORIENT_END = 328
_DEFAULT_ORIENTATION = bytes(_ORIENT_END - _ORIENT_START)


class Intent(Enum):
    INTENSITY = "intensity"
    LABEL = "label"
    NMR_RHO = "nmr-rho"
    NMR_T1 = "nmr-t1"
    NMR_T2 = "nmr-t2"


@dataclass(frozen=True)
class Volume:
    """A 3D scalar grid with voxel spacing in mm.

    ``data`` has shape ``dims``; axis 0 is the fastest-varying axis in the
    on-disk layout. Volumes are immutable by convention: operations return
    new instances and never write through ``data``.
    """

    data: np.ndarray
    spacing: tuple[float, float, float]
    intent: Intent = Intent.INTENSITY
    orientation: bytes = field(default=_DEFAULT_ORIENTATION, repr=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValidationError(f"volume data must be 3D, got {data.ndim}D")
        if any(d <= 0 for d in data.shape):
            raise ValidationError(f"volume dims must be positive, got {data.shape}")
        if len(self.spacing) != 3 or any(
                not math.isfinite(s) or s <= 0 for s in self.spacing):
            raise ValidationError(f"spacing must be 3 positive reals, got {self.spacing}")
        if self.intent is Intent.LABEL:
            if not np.issubdtype(data.dtype, np.integer):
                if np.any(data != np.floor(data)):
                    raise ValidationError("label volume contains non-integer values")
                data = data.astype(np.int32)
            if data.min(initial=0) < 0:
                raise ValidationError("label volume contains negative values")
        elif not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        if len(self.orientation) != _ORIENT_END - _ORIENT_START:
            raise ValidationError("orientation block must be 76 bytes")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray, intent: Intent | None = None) -> "Volume":
        return Volume(data, self.spacing, intent or self.intent, self.orientation)


@dataclass(frozen=True)
class BrainMask:
    """Boolean voxel mask matching a Volume's dims."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValidationError(f"mask must be 3D, got {data.ndim}D")
        if data.dtype != np.bool_:
            data = data.astype(bool)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def count(self) -> int:
        return int(self.data.sum())

    def require_match(self, volume: Volume) -> None:
        if self.dims != volume.dims:
            raise UsageError(f"mask dims {self.dims} do not match volume dims {volume.dims}")
        if self.count == 0:
            raise UsageError("mask has no true voxels")


@dataclass(frozen=True)
class NMRMaps:
    """Co-registered proton density, T1 (ms), and T2 (ms) maps for one subject."""

    rho: Volume
    t1: Volume
    t2: Volume

    def __post_init__(self):
        for name, vol in (("rho", self.rho), ("t1", self.t1), ("t2", self.t2)):
            if vol.intent is Intent.LABEL:
                raise ValidationError(f"{name} map cannot have label intent")
        if not (self.rho.dims == self.t1.dims == self.t2.dims):
            raise ValidationError("NMR maps must share dims")
        if not (self.rho.spacing == self.t1.spacing == self.t2.spacing):
            raise ValidationError("NMR maps must share spacing")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.rho.dims

    def require_positive(self, mask: BrainMask) -> None:
        """In-mask values of all three maps must be strictly positive."""
        m = mask.data
        for name, vol in (("rho", self.rho), ("t1", self.t1), ("t2", self.t2)):
            vals = vol.data[m]
            if vals.size and (not np.all(np.isfinite(vals)) or vals.min() <= 0):
                raise ValidationError(f"{name} map has non-positive in-mask values")


def empirical_percentile(values: np.ndarray, pct: float) -> float:
    """Order-statistic percentile: the ceil(pct/100 * n)-th smallest sample."""
    values = np.asarray(values).ravel()
    if values.size == 0:
        raise UsageError("percentile of empty sample set")
    n = values.size
    # epsilon guards against float noise pushing an exact-integer rank up
    rank = math.ceil(pct * n / 100.0 - 1e-9)
    idx = min(n - 1, max(0, rank - 1))
    return float(np.partition(values, idx)[idx])


# ---------------------------------------------------------------------------
# NIfTI-1 subset I/O
# ---------------------------------------------------------------------------

def read_nifti(path: str | Path, intent: Intent | None = None) -> Volume:
    """Read a single-file uncompressed NIfTI-1 volume.

    Supports 3D images with datatype uint8 (2), int16 (4), or float32 (16),
    little-endian. ``scl_slope``/``scl_inter`` are applied when the slope is
    nonzero. When ``intent`` is None, unscaled non-negative integer payloads
    come back as labels and everything else as intensity.

    Raises:
        FormatError: malformed header; the message names the byte offset.
        UnsupportedDatatypeError: datatype outside the supported subset.
        TruncationError: data section shorter than the header declares.
    """
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise FormatError(
            f"file is {len(raw)} bytes, shorter than the 348-byte header")
    sizeof_hdr = struct.unpack_from("<i", raw, 0)[0]
    if sizeof_hdr != HEADER_SIZE:
        raise FormatError(f"sizeof_hdr at byte 0 is {sizeof_hdr}, expected 348")
    magic = raw[344:348]
    if magic != MAGIC:
        raise FormatError(f"magic at byte 344 is {magic!r}, expected {MAGIC!r}")
    dim = struct.unpack_from("<8h", raw, 40)
    if dim[0] != 3:
        raise FormatError(f"dim[0] at byte 40 is {dim[0]}, only 3D supported")
    dims = dim[1:4]
    if any(d <= 0 for d in dims):
        raise FormatError(f"dim[1..3] at byte 42 must be positive, got {dims}")
    datatype, bitpix = struct.unpack_from("<2h", raw, 70)
    if datatype not in _DTYPES:
        raise UnsupportedDatatypeError(
            f"datatype code {datatype} at byte 70 unsupported (supported: 2, 4, 16)")
    dtype = _DTYPES[datatype]
    if bitpix != dtype.itemsize * 8:
        raise FormatError(
            f"bitpix at byte 72 is {bitpix}, expected {dtype.itemsize * 8} for datatype {datatype}")
    pixdim = struct.unpack_from("<8f", raw, 76)
    spacing = pixdim[1:4]
    if any(not math.isfinite(s) or s <= 0 for s in spacing):
        raise FormatError(f"pixdim[1..3] at byte 80 must be positive, got {spacing}")
    vox_offset, scl_slope, scl_inter = struct.unpack_from("<3f", raw, 108)
    if not vox_offset.is_integer() or vox_offset < MIN_VOX_OFFSET:
        raise FormatError(
            f"vox_offset at byte 108 is {vox_offset}, expected integer >= {MIN_VOX_OFFSET}")
    offset = int(vox_offset)
    n_voxels = dims[0] * dims[1] * dims[2]
    n_bytes = n_voxels * dtype.itemsize
    if len(raw) < offset + n_bytes:
        raise TruncationError(
            f"data section: expected {n_bytes} bytes at offset {offset}, "
            f"file holds {max(0, len(raw) - offset)}")
    flat = np.frombuffer(raw, dtype=dtype, count=n_voxels, offset=offset)
    unscaled = scl_slope in (0.0, 1.0) and scl_inter == 0.0
    if datatype == DT_FLOAT32 and unscaled:
        # keep float32 payloads bit-exact for round-trips
        data = flat.reshape(dims, order="F").copy()
    else:
        data = flat.reshape(dims, order="F").astype(np.float64)
        if scl_slope != 0.0:
            data = data * scl_slope + scl_inter
    if intent is None:
        if datatype != DT_FLOAT32 and unscaled and data.min(initial=0) >= 0:
            intent = Intent.LABEL
            data = data.astype(np.int32)
        else:
            intent = Intent.INTENSITY
    elif intent is Intent.LABEL and not np.issubdtype(data.dtype, np.integer):
        data = np.rint(data).astype(np.int32)
    return Volume(data, spacing, intent, orientation=raw[_ORIENT_START:_ORIENT_END])


def write_nifti(volume: Volume, path: str | Path) -> None:
    """Write a Volume as single-file uncompressed NIfTI-1.

    Label volumes with values <= 255 are stored as uint8, larger labels as
    int16; everything else as float32. Slope/inter are written as 1/0, so a
    read-back reproduces float32 data bit-exactly.

    Raises:
        ValidationError: non-finite voxel values or labels exceeding int16.
    """
    data = volume.data
    if volume.intent is Intent.LABEL:
        vmax = int(data.max(initial=0))
        if vmax <= 255:
            datatype, dtype = DT_UINT8, _DTYPES[DT_UINT8]
        elif vmax <= 32767:
            datatype, dtype = DT_INT16, _DTYPES[DT_INT16]
        else:
            raise ValidationError(f"label value {vmax} exceeds int16 storage")
    else:
        if not np.all(np.isfinite(data)):
            raise ValidationError("volume contains non-finite voxel values")
        datatype, dtype = DT_FLOAT32, _DTYPES[DT_FLOAT32]

    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, *volume.dims, 1, 1, 1, 1)
    struct.pack_into("<2h", header, 70, datatype, dtype.itemsize * 8)
    struct.pack_into("<8f", header, 76, 1.0, *volume.spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<3f", header, 108, float(MIN_VOX_OFFSET), 1.0, 0.0)
    header[_ORIENT_START:_ORIENT_END] = volume.orientation
    header[344:348] = MAGIC

    payload = np.ascontiguousarray(data.ravel(order="F")).astype(dtype)
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(b"\x00" * (MIN_VOX_OFFSET - HEADER_SIZE))
        fh.write(payload.tobytes())


# ---------------------------------------------------------------------------
# Conforming and intensity standardization
# ---------------------------------------------------------------------------

def conform(volume: Volume) -> Volume:
    """Resample to 1 mm isotropic spacing.

    Trilinear interpolation for continuous intents, nearest-neighbor for
    labels. Output dims are ``round(dims * spacing)`` per axis. Sample
    positions are clamped at the border, and a volume already at 1 mm comes
    back with identical data.
    """
    if volume.spacing == (1.0, 1.0, 1.0):
        return volume
    out_dims = tuple(max(1, round(d * s)) for d, s in zip(volume.dims, volume.spacing))
    axes = [np.arange(n, dtype=np.float64) / s for n, s in zip(out_dims, volume.spacing)]
    coords = np.meshgrid(*axes, indexing="ij")
    order = 0 if volume.intent is Intent.LABEL else 1
    out = ndimage.map_coordinates(
        volume.data.astype(np.float64, copy=False), coords, order=order, mode="nearest")
    if volume.intent is Intent.LABEL:
        out = np.rint(out).astype(volume.data.dtype)
    return Volume(out, (1.0, 1.0, 1.0), volume.intent, volume.orientation)


def scale_unit(volume: Volume, mask: BrainMask) -> Volume:
    """Scale intensities into [0, 1] by the in-mask 99.9th percentile.

    The whole volume is divided by the percentile and clamped to [0, 1], so
    the scaling is invariant to any positive pre-multiplication of the input.

    Raises:
        DegenerateIntensityError: all in-mask values are zero.
    """
    mask.require_match(volume)
    samples = volume.data[mask.data]
    ceiling = empirical_percentile(samples, 99.9)
    if ceiling <= 0.0:
        raise DegenerateIntensityError("in-mask intensities have no positive mass")
    out = np.clip(volume.data / ceiling, 0.0, 1.0)
    return Volume(out, volume.spacing, Intent.INTENSITY, volume.orientation)


def standardize_wm(volume: Volume, mask: BrainMask) -> Volume:
    """Rescale so the white-matter mean of a T1-weighted image sits at 0.8.

    White matter is taken as the brightest class of a three-class Gaussian
    mixture fit to the positive in-mask intensities.

    Raises:
        EstimationError: mixture fit degenerate or under-sampled.
    """
    from .tissue import fit_gmm3

    mask.require_match(volume)
    samples = volume.data[mask.data]
    samples = samples[samples > 0]
    fit = fit_gmm3(samples)
    wm_mean = max(fit.means)
    return Volume(volume.data * (0.8 / wm_mean), volume.spacing,
                  volume.intent, volume.orientation)
