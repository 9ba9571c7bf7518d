"""Model-facing payload generation.

Produces everything a set-latent shape autoencoder consumes per asset:
area-uniform surface clouds at several sizes, quarter-length
farthest-point downsamples, labeled occupancy queries, and the
conditioning payloads (16^3 voxel occupancy, 8 bounding-box corners,
512-point sparse clouds, 2048+8 partial clouds with an extension box).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .bvh import build_bvh
from .grids import LabelGrid, ScalarGrid
from .mesh import GeometryError, TriangleMesh, triangle_areas

SURFACE_SIZES = (2048, 4096, 8192)
DOWNSAMPLE_RATIO = 4
SPARSE_COUNT = 512
PARTIAL_COUNT = 2048
BOX_CORNER_COUNT = 8
VOXEL_RES = 16

PAYLOAD_VOXEL = "voxel16"
PAYLOAD_BBOX = "bbox8"
PAYLOAD_SPARSE = "sparse512"
PAYLOAD_PARTIAL = "partial2048+8"

# fixed RNG stream salts so each sampler owns an independent substream
_SALT_SURFACE = 11
_SALT_DOWNSAMPLE = 12
_SALT_QUERIES = 13
_SALT_PARTIAL = 14
_SALT_CROPBOX = 15


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    seed: int = 0
    source: str = ""

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if p.ndim != 2 or p.shape[1] != 3:
            raise GeometryError("points must be (n, 3)")
        if p.size and (np.abs(p).max() > 1.0 + 1e-9):
            raise GeometryError("points leave the [-1,1]^3 domain")
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class QuerySet:
    queries: np.ndarray
    labels: np.ndarray
    near_fraction: float
    sigma: float

    def __post_init__(self):
        q = np.ascontiguousarray(np.asarray(self.queries, dtype=np.float64))
        l = np.ascontiguousarray(np.asarray(self.labels, dtype=np.uint8))
        if q.ndim != 2 or q.shape[1] != 3 or len(q) != len(l):
            raise GeometryError("queries/labels shape mismatch")
        q.flags.writeable = False
        l.flags.writeable = False
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "labels", l)

    def __len__(self) -> int:
        return len(self.queries)

    @property
    def n_near(self) -> int:
        return round(len(self.queries) * self.near_fraction)


@dataclass(frozen=True)
class ConditionPayload:
    """One conditioning record; field usage depends on ``kind``."""

    kind: str
    voxel: Optional[np.ndarray] = None    # (16,16,16) uint8, voxel16
    points: Optional[np.ndarray] = None   # sparse512 / partial
    corners: Optional[np.ndarray] = None  # (8,3), bbox8 / partial

    def __post_init__(self):
        if self.kind == PAYLOAD_VOXEL:
            ok = (self.voxel is not None
                  and self.voxel.shape == (VOXEL_RES,) * 3)
        elif self.kind == PAYLOAD_BBOX:
            ok = self.corners is not None and self.corners.shape == (8, 3)
        elif self.kind == PAYLOAD_SPARSE:
            ok = (self.points is not None
                  and self.points.shape == (SPARSE_COUNT, 3))
        elif self.kind == PAYLOAD_PARTIAL:
            ok = (self.points is not None
                  and self.points.shape == (PARTIAL_COUNT, 3)
                  and self.corners is not None
                  and self.corners.shape == (8, 3))
        else:
            raise GeometryError(f"unknown payload kind {self.kind!r}")
        if not ok:
            raise GeometryError(f"payload shape violates {self.kind} contract")


@dataclass(frozen=True)
class SamplingSpec:
    surface_sizes: tuple = SURFACE_SIZES
    downsample_ratio: int = DOWNSAMPLE_RATIO
    n_uniform: int = 8192
    n_near: int = 8192
    near_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for n in self.surface_sizes:
            if n % self.downsample_ratio:
                raise GeometryError(
                    f"surface size {n} not divisible by {self.downsample_ratio}")


# ---------------------------------------------------------------------------
# surface sampling
# ---------------------------------------------------------------------------

def _alias_table(weights: np.ndarray):
    """Walker/Vose alias table; deterministic for a fixed weight order."""
    n = len(weights)
    total = weights.sum()
    if not total > 0.0:
        raise GeometryError("zero-area mesh cannot be sampled")
    scaled = weights * (n / total)
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        if scaled[l] < 1.0:
            small.append(l)
        else:
            large.append(l)
    return prob, alias


def _require_normalized(mesh: TriangleMesh):
    lo, hi = mesh.bounds()
    if min(lo.min(), -hi.max()) < -1.0 - 1e-9:
        raise GeometryError("mesh must be normalized into [-1,1]^3 first")


def sample_surface(mesh: TriangleMesh, count: int, seed: int = 0,
                   warn_nonstandard: bool = True) -> PointCloud:
    """Area-uniform surface points: triangle by alias table over areas,
    position by uniform barycentric coordinates."""
    if mesh.is_empty():
        raise GeometryError("cannot sample an empty mesh")
    _require_normalized(mesh)
    if warn_nonstandard and count not in SURFACE_SIZES:
        warnings.warn(f"surface size {count} outside the standard set "
                      f"{SURFACE_SIZES}", stacklevel=2)
    areas = triangle_areas(mesh)
    prob, alias = _alias_table(areas)
    rng = np.random.default_rng(np.random.SeedSequence([seed, _SALT_SURFACE]))
    n_tri = len(areas)
    slot = rng.integers(0, n_tri, size=count)
    accept = rng.random(count) < prob[slot]
    tri = np.where(accept, slot, alias[slot])
    u = rng.random(count)
    v = rng.random(count)
    flip = u + v > 1.0
    u = np.where(flip, 1.0 - u, u)
    v = np.where(flip, 1.0 - v, v)
    tv = mesh.vertices[mesh.triangles[tri]]
    pts = (tv[:, 0]
           + u[:, None] * (tv[:, 1] - tv[:, 0])
           + v[:, None] * (tv[:, 2] - tv[:, 0]))
    return PointCloud(points=pts, seed=seed, source=mesh.provenance)


def fps_downsample(cloud: PointCloud, count: int, seed: int = 0,
                   method: str = "fps") -> PointCloud:
    """Farthest-point (default) or random subsampling to ``count`` points."""
    n = len(cloud)
    if count > n:
        raise GeometryError(f"cannot downsample {n} points to {count}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _SALT_DOWNSAMPLE]))
    if method == "random":
        idx = np.sort(rng.choice(n, size=count, replace=False))
    elif method == "fps":
        start = int(rng.integers(0, n))
        idx = kernels.fps_indices(cloud.points, count, start)
    else:
        raise GeometryError(f"unknown downsample method {method!r}")
    return PointCloud(points=cloud.points[idx], seed=seed, source=cloud.source)


# ---------------------------------------------------------------------------
# occupancy queries
# ---------------------------------------------------------------------------

def sample_queries(signed: ScalarGrid, surface: PointCloud,
                   spec: SamplingSpec, iso: float = 0.0) -> QuerySet:
    """Uniform + near-surface queries labeled from the signed grid.

    Queries are emitted uniform block first, then the near-surface block
    (surface point plus Gaussian jitter, clamped to the domain); a label
    is 1 where the interpolated field is below the iso level.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _SALT_QUERIES]))
    uni = rng.uniform(-1.0, 1.0, size=(spec.n_uniform, 3))
    pick = rng.integers(0, len(surface), size=spec.n_near)
    jitter = rng.normal(0.0, spec.near_sigma, size=(spec.n_near, 3))
    near = np.clip(surface.points[pick] + jitter, -1.0, 1.0)
    queries = np.concatenate([uni, near])
    labels = (signed.trilinear(queries) < iso).astype(np.uint8)
    frac = spec.n_near / max(len(queries), 1)
    return QuerySet(queries=queries, labels=labels,
                    near_fraction=frac, sigma=spec.near_sigma)


# ---------------------------------------------------------------------------
# conditioning payloads
# ---------------------------------------------------------------------------

def _solid_cells_from_labels(labels: LabelGrid) -> np.ndarray:
    """Conservative 16^3 downsample: a cell is solid if any label-grid
    point inside it is inside."""
    res = labels.resolution
    coords = -1.0 + np.arange(res) * (2.0 / (res - 1))
    cell = np.clip(((coords + 1.0) / (2.0 / VOXEL_RES)).astype(np.int64),
                   0, VOXEL_RES - 1)
    occ = np.zeros((VOXEL_RES,) * 3, dtype=np.uint8)
    iz, iy, ix = np.nonzero(labels.labels)
    if len(iz):
        np.add.at(occ, (cell[iz], cell[iy], cell[ix]), 1)
    return (occ > 0).astype(np.uint8)


def voxelize16(mesh: TriangleMesh, labels: Optional[LabelGrid] = None,
               directions: int = 64, tau: float = 0.0) -> ConditionPayload:
    """16^3 occupancy: a cell is occupied when a triangle touches it or
    its interior is inside the shape.

    Prefers the label grid of the remesh stage when available; otherwise
    the cell centers are classified by probe-ray visibility directly.
    """
    from .remesh import label_points  # local import to avoid a cycle
    _require_normalized(mesh)
    surf = kernels.surface_voxel_mask(mesh.triangle_corners(), VOXEL_RES)
    if labels is not None:
        solid = _solid_cells_from_labels(labels)
    else:
        cell = 2.0 / VOXEL_RES
        c = -1.0 + (np.arange(VOXEL_RES) + 0.5) * cell
        zz, yy, xx = np.meshgrid(c, c, c, indexing="ij")
        centers = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], 1)
        bvh = build_bvh(mesh)
        solid = label_points(bvh, centers, directions, tau).reshape(
            (VOXEL_RES,) * 3)
    return ConditionPayload(kind=PAYLOAD_VOXEL,
                            voxel=(surf | solid).astype(np.uint8))


_CORNER_ORDER = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0],
                          [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]])


def box_corners(lo, hi) -> np.ndarray:
    """The 8 corners of an AABB in the fixed ---, +--, -+-, ++-, ... order."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    return np.where(_CORNER_ORDER == 1, hi, lo)


def bbox_corners(mesh: TriangleMesh) -> ConditionPayload:
    _require_normalized(mesh)
    lo, hi = mesh.bounds()
    return ConditionPayload(kind=PAYLOAD_BBOX, corners=box_corners(lo, hi))


def sparse_cloud(mesh: TriangleMesh, seed: int = 0) -> ConditionPayload:
    cloud = sample_surface(mesh, SPARSE_COUNT, seed, warn_nonstandard=False)
    return ConditionPayload(kind=PAYLOAD_SPARSE, points=cloud.points)


def make_partial(mesh: TriangleMesh, box_lo, box_hi,
                 seed: int = 0) -> ConditionPayload:
    """Surface cloud with the box region cropped away, plus the box
    corners: 2048 retained points + 8 corners."""
    _require_normalized(mesh)
    box_lo = np.asarray(box_lo, dtype=np.float64)
    box_hi = np.asarray(box_hi, dtype=np.float64)
    if (box_hi <= box_lo).any():
        raise GeometryError("degenerate crop box")
    if (box_hi < -1.0).any() or (box_lo > 1.0).any():
        raise GeometryError("crop box does not overlap the domain")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _SALT_PARTIAL]))
    probe = sample_surface(mesh, 8192, int(rng.integers(1 << 62)),
                           warn_nonstandard=False)
    inside = ((probe.points > box_lo) & (probe.points < box_hi)).all(axis=1)
    retained_frac = 1.0 - inside.mean()
    if retained_frac < 0.05:
        raise GeometryError(
            f"crop box covers {1 - retained_frac:.0%} of the surface")
    kept: list[np.ndarray] = []
    n_kept = 0
    while n_kept < PARTIAL_COUNT:
        batch = sample_surface(mesh, PARTIAL_COUNT,
                               int(rng.integers(1 << 62)),
                               warn_nonstandard=False)
        mask = ~(((batch.points > box_lo)
                  & (batch.points < box_hi)).all(axis=1))
        kept.append(batch.points[mask])
        n_kept += int(mask.sum())
    points = np.concatenate(kept)[:PARTIAL_COUNT]
    return ConditionPayload(kind=PAYLOAD_PARTIAL, points=points,
                            corners=box_corners(box_lo, box_hi))


def random_crop_box(mesh: TriangleMesh, seed: int = 0):
    """Seeded axis-aligned crop box covering 10-40% of the mesh AABB."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _SALT_CROPBOX]))
    lo, hi = mesh.bounds()
    extent = hi - lo
    frac = rng.uniform(0.10, 0.40) ** (1.0 / 3.0)
    size = extent * frac
    slack = extent - size
    start = lo + rng.random(3) * slack
    return start, start + size


# ---------------------------------------------------------------------------
# per-asset bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleSet:
    surface: PointCloud
    downsample: PointCloud
    queries: QuerySet
    payloads: tuple = ()
    surface_size: int = 0


def _stream_seeds(seed: int, asset_key: int, n: int = 8):
    ss = np.random.SeedSequence([np.uint64(seed), np.uint64(asset_key)])
    return [int(s.generate_state(1)[0]) for s in ss.spawn(n)]


def make_sample_set(mesh: TriangleMesh, signed: ScalarGrid,
                    labels: LabelGrid, spec: SamplingSpec,
                    asset_key: int = 0,
                    surface_size: Optional[int] = None) -> SampleSet:
    """All payloads for one (normalized, remeshed) asset.

    Per-purpose RNG streams derive from (spec.seed, asset_key) so assets
    can run concurrently without perturbing each other's outputs.
    """
    seeds = _stream_seeds(spec.seed, asset_key)
    if surface_size is None:
        pick_rng = np.random.default_rng(seeds[0])
        surface_size = int(np.asarray(spec.surface_sizes)[
            pick_rng.integers(0, len(spec.surface_sizes))])
    surface = sample_surface(mesh, surface_size, seeds[1])
    down = fps_downsample(surface, surface_size // spec.downsample_ratio,
                          seeds[2])
    queries = sample_queries(
        signed, surface,
        SamplingSpec(surface_sizes=spec.surface_sizes,
                     downsample_ratio=spec.downsample_ratio,
                     n_uniform=spec.n_uniform, n_near=spec.n_near,
                     near_sigma=spec.near_sigma, seed=seeds[3]))
    box_lo, box_hi = random_crop_box(mesh, seeds[4])
    payloads = (
        voxelize16(mesh, labels),
        bbox_corners(mesh),
        sparse_cloud(mesh, seeds[5]),
        make_partial(mesh, box_lo, box_hi, seeds[6]),
    )
    return SampleSet(surface=surface, downsample=down, queries=queries,
                     payloads=payloads, surface_size=surface_size)
