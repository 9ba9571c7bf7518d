"""Procedural test shapes.

Deterministic generators for closed primitives (box, icosphere, capped
cylinder, torus, trefoil tube) and deliberately defective inputs (open
boxes, slitted panels, bare sheets) used to exercise the sealing
pipeline and to build synthetic corpora.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh


def _weld(verts, tris) -> TriangleMesh:
    v = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    uniq, inverse = np.unique(v, axis=0, return_inverse=True)
    return TriangleMesh(vertices=uniq, triangles=inverse[t])


def _quad(a, b, c, d):
    """Two triangles for quad abcd (counter-clockwise = front)."""
    return [(a, b, c), (a, c, d)]


_BOX_FACES = (
    # (axis, sign, corner order giving outward winding)
    (0, -1, ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0))),
    (0, +1, ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1))),
    (1, -1, ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1))),
    (1, +1, ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0))),
    (2, -1, ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0))),
    (2, +1, ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1))),
)


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0),
        skip_faces=()) -> TriangleMesh:
    """Axis-aligned cuboid; ``skip_faces`` omits entries of
    {-x,+x,-y,+y,-z,+z} to produce open boxes."""
    size = np.asarray(size, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    lo = center - size / 2.0
    hi = center + size / 2.0
    names = {(0, -1): "-x", (0, 1): "+x", (1, -1): "-y",
             (1, 1): "+y", (2, -1): "-z", (2, 1): "+z"}
    verts = []
    tris = []
    for axis, sign, corners in _BOX_FACES:
        if names[(axis, sign)] in skip_faces:
            continue
        ids = []
        for cx, cy, cz in corners:
            p = (lo[0] if cx == 0 else hi[0],
                 lo[1] if cy == 0 else hi[1],
                 lo[2] if cz == 0 else hi[2])
            ids.append(len(verts))
            verts.append(p)
        tris.extend(_quad(*ids))
    return _weld(verts, tris)


def unit_cube() -> TriangleMesh:
    return box(size=(1.0, 1.0, 1.0), center=(0.5, 0.5, 0.5))


def rect_sheet(width=1.0, height=1.0, z=0.0) -> TriangleMesh:
    """Single zero-thickness rectangle in the z-plane."""
    w, h = width / 2.0, height / 2.0
    verts = [(-w, -h, z), (w, -h, z), (w, h, z), (-w, h, z)]
    return _weld(verts, _quad(0, 1, 2, 3))


def panel_with_holes(x0, x1, y0, y1, z, holes, flip=False):
    """Axis-aligned rectangle in a z-plane with rectangular holes.

    ``holes`` is a sequence of (hx0, hx1, hy0, hy1).  Returns (verts,
    tris) for composition into larger shapes.
    """
    xs = sorted({x0, x1, *(h[0] for h in holes), *(h[1] for h in holes)})
    ys = sorted({y0, y1, *(h[2] for h in holes), *(h[3] for h in holes)})
    verts = []
    tris = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            cx = (xs[i] + xs[i + 1]) / 2.0
            cy = (ys[j] + ys[j + 1]) / 2.0
            if any(h[0] < cx < h[1] and h[2] < cy < h[3] for h in holes):
                continue
            base = len(verts)
            verts.extend([(xs[i], ys[j], z), (xs[i + 1], ys[j], z),
                          (xs[i + 1], ys[j + 1], z), (xs[i], ys[j + 1], z)])
            if flip:
                tris.extend(_quad(base, base + 3, base + 2, base + 1))
            else:
                tris.extend(_quad(base, base + 1, base + 2, base + 3))
    return verts, tris


def holed_box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0),
              holes=((-0.1, 0.1, -0.1, 0.1),)) -> TriangleMesh:
    """Box whose +z face carries rectangular holes (hole coords are
    relative to the box center)."""
    size = np.asarray(size, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    open_part = box(size, center, skip_faces=("+z",))
    lo = center - size / 2.0
    hi = center + size / 2.0
    abs_holes = [(center[0] + h[0], center[0] + h[1],
                  center[1] + h[2], center[1] + h[3]) for h in holes]
    pv, pt = panel_with_holes(lo[0], hi[0], lo[1], hi[1], hi[2], abs_holes)
    verts = np.concatenate([open_part.vertices, np.asarray(pv)])
    tris = np.concatenate([open_part.triangles,
                           np.asarray(pt, dtype=np.int64)
                           + open_part.n_vertices])
    return _weld(verts, tris)


def icosphere(radius=1.0, subdivisions=2, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    verts /= np.sqrt((verts * verts).sum(axis=1))[:, None]
    tris = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_tris = []

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = np.asarray(verts[i]) + np.asarray(verts[j])
                m /= np.sqrt((m * m).sum())
                cache[key] = len(verts)
                verts.append(tuple(m))
            return cache[key]

        for a, b, c in tris:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_tris += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = new_tris
    v = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(vertices=v, triangles=np.asarray(tris, dtype=np.int64))


def cylinder(radius=0.5, height=1.0, segments=32,
             center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    cx, cy, cz = center
    ang = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)], 1)
    z0, z1 = cz - height / 2.0, cz + height / 2.0
    verts = [(x, y, z0) for x, y in ring] + [(x, y, z1) for x, y in ring]
    verts += [(cx, cy, z0), (cx, cy, z1)]
    b0, b1 = 0, segments
    c0, c1 = 2 * segments, 2 * segments + 1
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        tris.extend(_quad(b0 + i, b0 + j, b1 + j, b1 + i))
        tris.append((c0, b0 + j, b0 + i))   # bottom cap faces -z
        tris.append((c1, b1 + i, b1 + j))   # top cap faces +z
    return _weld(verts, tris)


def _tube(curve: np.ndarray, tube_radius: float, segments: int) -> TriangleMesh:
    """Closed tube around a closed polyline (parallel-transport frames)."""
    n = len(curve)
    tangents = np.roll(curve, -1, axis=0) - np.roll(curve, 1, axis=0)
    tangents /= np.sqrt((tangents * tangents).sum(axis=1))[:, None]
    # initial normal: anything not parallel to t0
    ref = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(ref, tangents[0])) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    normal = np.cross(tangents[0], ref)
    normal /= np.sqrt((normal * normal).sum())
    rings = []
    for k in range(n):
        t = tangents[k]
        normal = normal - np.dot(normal, t) * t
        normal /= np.sqrt((normal * normal).sum())
        binormal = np.cross(t, normal)
        ang = 2.0 * np.pi * np.arange(segments) / segments
        ring = (curve[k][None, :]
                + tube_radius * (np.cos(ang)[:, None] * normal[None, :]
                                 + np.sin(ang)[:, None] * binormal[None, :]))
        rings.append(ring)
    verts = np.concatenate(rings)
    tris = []
    for k in range(n):
        k2 = (k + 1) % n
        for s in range(segments):
            s2 = (s + 1) % segments
            a = k * segments + s
            b = k * segments + s2
            c = k2 * segments + s2
            d = k2 * segments + s
            tris.extend(_quad(a, b, c, d))
    return TriangleMesh(vertices=verts, triangles=np.asarray(tris, np.int64))


def torus(major_radius=0.7, minor_radius=0.25, major_segments=48,
          minor_segments=24) -> TriangleMesh:
    ang = 2.0 * np.pi * np.arange(major_segments) / major_segments
    curve = np.stack([major_radius * np.cos(ang),
                      major_radius * np.sin(ang),
                      np.zeros_like(ang)], axis=1)
    return _tube(curve, minor_radius, minor_segments)


def trefoil_knot(scale=0.3, tube_radius=0.18, curve_segments=96,
                 tube_segments=16) -> TriangleMesh:
    t = 2.0 * np.pi * np.arange(curve_segments) / curve_segments
    curve = scale * np.stack([
        np.sin(t) + 2.0 * np.sin(2.0 * t),
        np.cos(t) - 2.0 * np.cos(2.0 * t),
        -np.sin(3.0 * t)], axis=1)
    return _tube(curve, tube_radius, tube_segments)
