"""Marching cubes isosurface extraction.

Classic 256-case extraction with exact vertex welding: every crossed
grid edge produces exactly one vertex, keyed globally by (axis, lower
corner), so adjacent cells share vertices by construction and the output
is closed wherever the nonpositive region stays inside the grid.

Convention: a corner is "inside" when its value is strictly below the
iso level; triangles are wound so that faces point away from the inside
region (outward normals, positive signed volume for inside-negative
fields).
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .grids import ScalarGrid
from .mc_tables import EDGE_AXIS, EDGE_DX, EDGE_DY, EDGE_DZ, ROW_LEN, TRI_TABLE
from .mesh import TriangleMesh


def marching_cubes(grid: ScalarGrid, iso: float = 0.0) -> TriangleMesh:
    """Extract the iso-surface of a scalar grid as a triangle mesh.

    Returns an empty mesh when the field does not cross the iso level.
    """
    values = grid.values
    res = grid.resolution
    cubeidx, counts = kernels.mc_classify(values, float(iso), ROW_LEN)
    flat = counts.ravel().astype(np.int64)
    offsets = np.empty(flat.size + 1, np.int64)
    offsets[0] = 0
    np.cumsum(flat, out=offsets[1:])
    total = int(offsets[-1])
    if total == 0:
        return TriangleMesh(vertices=np.zeros((0, 3)),
                            triangles=np.zeros((0, 3), np.int64))
    keys = kernels.mc_emit(cubeidx, counts, offsets, TRI_TABLE,
                           EDGE_AXIS, EDGE_DX, EDGE_DY, EDGE_DZ, res)
    uniq, inverse = np.unique(keys, return_inverse=True)
    # the raw table winds faces toward the inside; swap to outward
    triangles = inverse.reshape(-1, 3)[:, [0, 2, 1]].astype(np.int64)

    r3 = res * res * res
    axis = uniq // r3
    rem = uniq - axis * r3
    px = rem % res
    py = (rem // res) % res
    pz = rem // (res * res)
    v0 = values[pz, py, px]
    qx = px + (axis == 0)
    qy = py + (axis == 1)
    qz = pz + (axis == 2)
    v1 = values[qz, qy, qx]
    t = (iso - v0) / (v1 - v0)
    h = grid.spacing
    verts = np.stack([-1.0 + px * h, -1.0 + py * h, -1.0 + pz * h], axis=1)
    verts[np.arange(len(uniq)), axis] += t * h
    return TriangleMesh(vertices=verts, triangles=triangles)
