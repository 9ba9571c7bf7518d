"""Bounding-volume hierarchy over triangles.

The build is a binned SAH (16 buckets, deterministic tie-breaking:
lower axis then lower bucket wins) with a median fallback for degenerate
centroid distributions.  The tree is stored as flat arrays so the query
kernels can traverse it; both kernel backends share the identical tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import GeometryError, TriangleMesh

_N_BUCKETS = 16
_MAX_DEPTH = 64


@dataclass(frozen=True)
class TriangleBVH:
    """Flat BVH: internal nodes carry child ids, leaves triangle ranges."""

    bmin: np.ndarray        # (n_nodes, 3)
    bmax: np.ndarray        # (n_nodes, 3)
    left: np.ndarray        # (n_nodes,) child id, or leaf start
    right: np.ndarray       # (n_nodes,) child id, or leaf count
    leaf: np.ndarray        # (n_nodes,) uint8 flag
    tri_order: np.ndarray   # (n_tris,) permutation into source triangles
    tri_verts: np.ndarray   # (n_tris, 3, 3) corner positions, in tree order
    leaf_size: int

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    @property
    def n_triangles(self) -> int:
        return len(self.tri_order)

    def _query_args(self):
        return (self.bmin, self.bmax, self.left, self.right, self.leaf,
                self.tri_verts)


def build_bvh(mesh: TriangleMesh, leaf_size: int = 4) -> TriangleBVH:
    if mesh.is_empty():
        raise GeometryError("cannot build a BVH over an empty mesh")
    if leaf_size < 1:
        raise GeometryError("leaf_size must be >= 1")
    tv = mesh.triangle_corners()
    tri_min = tv.min(axis=1)
    tri_max = tv.max(axis=1)
    centroid = (tri_min + tri_max) * 0.5

    bmins: list[np.ndarray] = []
    bmaxs: list[np.ndarray] = []
    lefts: list[int] = []
    rights: list[int] = []
    leafs: list[int] = []
    order: list[np.ndarray] = []
    n_placed = 0

    def new_node(idx):
        bmins.append(tri_min[idx].min(axis=0))
        bmaxs.append(tri_max[idx].max(axis=0))
        lefts.append(0)
        rights.append(0)
        leafs.append(0)
        return len(lefts) - 1

    def make_leaf(node, idx):
        nonlocal n_placed
        lefts[node] = n_placed
        rights[node] = len(idx)
        leafs[node] = 1
        order.append(idx)
        n_placed += len(idx)

    def split_indices(idx):
        """Deterministic SAH split; returns (lo, hi) or None for a leaf."""
        c = centroid[idx]
        cmin = c.min(axis=0)
        cmax = c.max(axis=0)
        span = cmax - cmin
        best = None  # (cost, axis, bucket_cut)
        for axis in range(3):
            if span[axis] <= 0.0:
                continue
            rel = (c[:, axis] - cmin[axis]) / span[axis]
            b = np.minimum((rel * _N_BUCKETS).astype(np.int64), _N_BUCKETS - 1)
            counts = np.bincount(b, minlength=_N_BUCKETS)
            # bucket AABB surface areas via prefix/suffix sweeps
            bl = np.full((_N_BUCKETS, 3), np.inf)
            bh = np.full((_N_BUCKETS, 3), -np.inf)
            np.minimum.at(bl, b, tri_min[idx])
            np.maximum.at(bh, b, tri_max[idx])
            pre_l = np.minimum.accumulate(bl, axis=0)
            pre_h = np.maximum.accumulate(bh, axis=0)
            suf_l = np.minimum.accumulate(bl[::-1], axis=0)[::-1]
            suf_h = np.maximum.accumulate(bh[::-1], axis=0)[::-1]
            n_pre = np.cumsum(counts)
            for cut in range(_N_BUCKETS - 1):
                nl = n_pre[cut]
                nr = len(idx) - nl
                if nl == 0 or nr == 0:
                    continue
                dl = np.maximum(pre_h[cut] - pre_l[cut], 0.0)
                dr = np.maximum(suf_h[cut + 1] - suf_l[cut + 1], 0.0)
                sa_l = dl[0] * dl[1] + dl[1] * dl[2] + dl[2] * dl[0]
                sa_r = dr[0] * dr[1] + dr[1] * dr[2] + dr[2] * dr[0]
                cost = sa_l * nl + sa_r * nr
                if best is None or cost < best[0]:
                    best = (cost, axis, cut)
        if best is not None:
            _, axis, cut = best
            rel = (c[:, axis] - cmin[axis]) / span[axis]
            b = np.minimum((rel * _N_BUCKETS).astype(np.int64), _N_BUCKETS - 1)
            mask = b <= cut
            return idx[mask], idx[~mask]
        # all centroids coincide: stable halving keeps determinism
        mid = len(idx) // 2
        return idx[:mid], idx[mid:]

    root_idx = np.arange(len(tv), dtype=np.int64)
    root = new_node(root_idx)
    stack = [(root, root_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if len(idx) <= leaf_size or depth >= _MAX_DEPTH - 1:
            make_leaf(node, idx)
            continue
        lo, hi = split_indices(idx)
        if len(lo) == 0 or len(hi) == 0:
            make_leaf(node, idx)
            continue
        nl = new_node(lo)
        lefts[node] = nl
        stack_entry_left = (nl, lo, depth + 1)
        nr = new_node(hi)
        rights[node] = nr
        # push right first so the left subtree is finalized first
        stack.append((nr, hi, depth + 1))
        stack.append(stack_entry_left)

    tri_order = np.concatenate(order) if order else np.empty(0, np.int64)
    return TriangleBVH(
        bmin=np.ascontiguousarray(np.asarray(bmins, dtype=np.float64)),
        bmax=np.ascontiguousarray(np.asarray(bmaxs, dtype=np.float64)),
        left=np.asarray(lefts, dtype=np.int64),
        right=np.asarray(rights, dtype=np.int64),
        leaf=np.asarray(leafs, dtype=np.uint8),
        tri_order=tri_order,
        tri_verts=np.ascontiguousarray(tv[tri_order]),
        leaf_size=leaf_size,
    )


def closest_point(bvh: TriangleBVH, p) -> tuple[float, int, np.ndarray]:
    """Exact distance to the mesh, the closest triangle (source index)
    and the foot point on it."""
    pts = np.asarray(p, dtype=np.float64).reshape(1, 3)
    dist, tri, foot = kernels.closest_point_batch(pts, *bvh._query_args())
    return float(dist[0]), int(bvh.tri_order[tri[0]]), foot[0]


def closest_point_many(bvh: TriangleBVH, points):
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    dist, tri, foot = kernels.closest_point_batch(pts, *bvh._query_args())
    return dist, bvh.tri_order[tri], foot


DEFAULT_T_MIN = 1e-4


def any_ray_escape(bvh: TriangleBVH, origin, direction,
                   t_min: float = DEFAULT_T_MIN) -> bool:
    """True iff the ray (origin + t*dir, t > t_min) hits no triangle."""
    o = np.ascontiguousarray(np.asarray(origin, dtype=np.float64))
    d = np.ascontiguousarray(np.asarray(direction, dtype=np.float64))
    norm = float(np.sqrt((d * d).sum()))
    if abs(norm - 1.0) > 1e-9:
        raise GeometryError("direction must be a unit vector")
    if t_min < 0.0:
        raise GeometryError("t_min must be >= 0")
    hit = kernels.ray_hit_triangle(o, d, t_min, *bvh._query_args())
    return bool(hit < 0)
