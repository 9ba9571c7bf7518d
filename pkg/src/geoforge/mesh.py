"""Triangle mesh container, normalization and exact mesh measurements."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Raised when an input mesh violates an operation's preconditions."""


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle soup.

    Vertices are float64 positions, triangles int64 index triplets.
    Instances are immutable: the backing arrays are marked read-only so
    they can be shared freely across worker threads.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise GeometryError("vertices must be (n, 3)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise GeometryError("triangles must be (m, 3)")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise GeometryError("triangle index out of range")
        if v.size and not np.isfinite(v).all():
            raise GeometryError("non-finite vertex coordinates")
        if t.size and ((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2])
                       | (t[:, 0] == t[:, 2])).any():
            raise GeometryError("triangle repeats a vertex index")
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def triangle_corners(self) -> np.ndarray:
        """(m, 3, 3) corner positions, contiguous for the kernels."""
        return np.ascontiguousarray(self.vertices[self.triangles])

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            raise GeometryError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class NormalizationTransform:
    """Map into the canonical cube: p' = (p - center) * scale."""

    center: np.ndarray
    scale: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise GeometryError("scale must be positive and finite")

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale + self.center

    def is_identity(self, tol: float = 1e-9) -> bool:
        return abs(self.scale - 1.0) <= tol and np.abs(self.center).max() <= tol


DEFAULT_MARGIN = 0.02


def normalize_mesh(mesh: TriangleMesh, margin: float = DEFAULT_MARGIN):
    """Center the mesh AABB at the origin and fit it inside [-1,1]^3.

    The longest AABB axis ends up spanning 2*(1-margin); aspect ratio is
    preserved.  Returns the transformed mesh and the transform applied.
    """
    if mesh.is_empty():
        raise GeometryError("cannot normalize an empty mesh")
    if not 0.0 <= margin < 0.5:
        raise GeometryError("margin must be in [0, 0.5)")
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise GeometryError("zero-extent mesh (all vertices identical)")
    center = (lo + hi) / 2.0
    scale = 2.0 * (1.0 - margin) / extent
    xform = NormalizationTransform(center=center, scale=scale)
    out = TriangleMesh(vertices=xform.apply(mesh.vertices),
                       triangles=mesh.triangles,
                       provenance=mesh.provenance)
    return out, xform


def mesh_volume(mesh: TriangleMesh) -> float:
    """Signed volume as the sum of tetrahedra against the origin.

    Positive and equal to the enclosed volume only for closed meshes with
    outward-consistent orientation; pair with :func:`is_watertight` before
    trusting the sign.
    """
    if mesh.is_empty():
        raise GeometryError("volume of an empty mesh")
    tv = mesh.vertices[mesh.triangles]
    cross = np.cross(tv[:, 1], tv[:, 2])
    return float(np.sum((tv[:, 0] * cross).sum(axis=1)) / 6.0)


@dataclass(frozen=True)
class WatertightReport:
    watertight: bool
    boundary_edges: int
    nonmanifold_edges: int
    misoriented_edges: int
    edge_count: int = 0

    def __bool__(self) -> bool:
        return self.watertight


def is_watertight(mesh: TriangleMesh) -> WatertightReport:
    """Edge-manifold closedness check with diagnostic counts.

    Watertight iff every undirected edge is shared by exactly two
    triangles and appears once in each direction (consistent winding).
    """
    t = mesh.triangles
    if len(t) == 0:
        return WatertightReport(False, 0, 0, 0, 0)
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    undirected = np.sort(directed, axis=1)
    _, und_counts = np.unique(undirected, axis=0, return_counts=True)
    boundary = int((und_counts == 1).sum())
    nonmanifold = int((und_counts > 2).sum())
    _, dir_counts = np.unique(directed, axis=0, return_counts=True)
    # an undirected pair traversed twice in the same direction is a flip
    misoriented = int((dir_counts > 1).sum())
    ok = boundary == 0 and nonmanifold == 0 and misoriented == 0
    return WatertightReport(ok, boundary, nonmanifold, misoriented,
                            len(und_counts))


def component_count(mesh: TriangleMesh) -> int:
    """Connected components of the face graph (shared-vertex adjacency)."""
    if mesh.is_empty():
        return 0
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    t = mesh.triangles
    rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    n = mesh.n_vertices
    adj = coo_matrix((np.ones(len(rows), np.int8), (rows, cols)), shape=(n, n))
    n_comp, labels = connected_components(adj, directed=False)
    used = np.zeros(n, dtype=bool)
    used[t.ravel()] = True
    return int(len(np.unique(labels[used])))


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    tv = mesh.vertices[mesh.triangles]
    cross = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    return 0.5 * np.sqrt((cross * cross).sum(axis=1))


def drop_degenerate(vertices: np.ndarray, triangles: np.ndarray,
                    area_eps: float = 1e-12):
    """Remove triangles with repeated indices or vanishing relative area.

    The area cut is taken relative to the squared AABB extent so it is
    insensitive to the source file's units.  Returns (triangles, dropped).
    """
    t = np.asarray(triangles, dtype=np.int64)
    if t.size == 0:
        return t.reshape(0, 3), 0
    keep = ~((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2])
             | (t[:, 0] == t[:, 2]))
    v = np.asarray(vertices, dtype=np.float64)
    used = t[keep]
    if used.size:
        tv = v[used]
        cross = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
        area = 0.5 * np.sqrt((cross * cross).sum(axis=1))
        extent = float((v.max(axis=0) - v.min(axis=0)).max())
        if extent > 0.0:
            ok = area > area_eps * extent * extent
        else:
            ok = np.zeros(len(used), dtype=bool)
        sub = np.zeros(len(t), dtype=bool)
        sub[keep] = ok
        keep = sub
    dropped = int(len(t) - keep.sum())
    return t[keep], dropped
