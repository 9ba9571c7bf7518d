"""Dense scalar and label grids on the canonical cube [-1,1]^3.

Values are stored as (R, R, R) arrays indexed ``[iz, iy, ix]`` so that x
varies fastest in memory; grid corner i maps to coordinate -1 + i*h with
h = 2/(R-1).  The CLGD file dump is a debugging aid, not a pipeline
artifact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .mesh import GeometryError

GRID_KIND_UDF = 0
GRID_KIND_SIGNED = 1
GRID_KIND_LABELS = 2

_CLGD_MAGIC = b"CLGD"
_CLGD_VERSION = 1

LABEL_OUTSIDE = 0
LABEL_INSIDE = 1


def grid_spacing(resolution: int) -> float:
    return 2.0 / (resolution - 1)


def grid_coords(resolution: int) -> np.ndarray:
    return -1.0 + np.arange(resolution) * grid_spacing(resolution)


@dataclass(frozen=True)
class ScalarGrid:
    """Scalar samples at the corners of an R^3 lattice over [-1,1]^3."""

    values: np.ndarray
    kind: int = GRID_KIND_UDF

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 3 or len(set(v.shape)) != 1:
            raise GeometryError("grid values must be (R, R, R)")
        if v.shape[0] < 2:
            raise GeometryError("grid resolution must be >= 2")
        if not np.isfinite(v).all():
            raise GeometryError("grid contains non-finite values")
        if self.kind == GRID_KIND_UDF and v.size and v.min() < 0.0:
            raise GeometryError("UDF grid has negative values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return grid_spacing(self.resolution)

    def trilinear(self, points) -> np.ndarray:
        """Trilinearly interpolated values at arbitrary points."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        res = self.resolution
        h = self.spacing
        f = (p + 1.0) / h
        i0 = np.clip(np.floor(f).astype(np.int64), 0, res - 2)
        t = np.clip(f - i0, 0.0, 1.0)
        ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
        tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
        v = self.values
        c00 = v[iz, iy, ix] * (1 - tx) + v[iz, iy, ix + 1] * tx
        c10 = v[iz, iy + 1, ix] * (1 - tx) + v[iz, iy + 1, ix + 1] * tx
        c01 = v[iz + 1, iy, ix] * (1 - tx) + v[iz + 1, iy, ix + 1] * tx
        c11 = v[iz + 1, iy + 1, ix] * (1 - tx) + v[iz + 1, iy + 1, ix + 1] * tx
        c0 = c00 * (1 - ty) + c10 * ty
        c1 = c01 * (1 - ty) + c11 * ty
        return c0 * (1 - tz) + c1 * tz


@dataclass(frozen=True)
class LabelGrid:
    """Per-grid-point inside(1)/outside(0) classification."""

    labels: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.labels, dtype=np.uint8))
        if v.ndim != 3 or len(set(v.shape)) != 1:
            raise GeometryError("labels must be (R, R, R)")
        if v.size and v.max() > 1:
            raise GeometryError("labels must be 0 or 1")
        v.flags.writeable = False
        object.__setattr__(self, "labels", v)

    @property
    def resolution(self) -> int:
        return self.labels.shape[0]

    @property
    def inside_fraction(self) -> float:
        return float(self.labels.mean())


def dump_grid(path, grid) -> None:
    """Write a grid to the CLGD debug format (f32 values / u8 labels)."""
    if isinstance(grid, LabelGrid):
        kind = GRID_KIND_LABELS
        payload = grid.labels.tobytes()
        res = grid.resolution
    else:
        kind = grid.kind
        payload = grid.values.astype("<f4").tobytes()
        res = grid.resolution
    with open(path, "wb") as fh:
        fh.write(_CLGD_MAGIC)
        fh.write(struct.pack("<IIB", _CLGD_VERSION, res, kind))
        fh.write(payload)


def load_grid(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _CLGD_MAGIC:
            raise GeometryError(f"{path}: not a CLGD file")
        version, res, kind = struct.unpack("<IIB", fh.read(9))
        if version != _CLGD_VERSION:
            raise GeometryError(f"{path}: unsupported CLGD version {version}")
        n = res ** 3
        if kind == GRID_KIND_LABELS:
            data = np.frombuffer(fh.read(n), dtype=np.uint8)
            return LabelGrid(labels=data.reshape(res, res, res).copy())
        data = np.frombuffer(fh.read(4 * n), dtype="<f4").astype(np.float64)
        return ScalarGrid(values=data.reshape(res, res, res), kind=kind)
