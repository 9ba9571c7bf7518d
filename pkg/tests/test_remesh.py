import numpy as np
import pytest

from geoforge import synth
from geoforge.bvh import build_bvh
from geoforge.grids import GRID_KIND_UDF, ScalarGrid, grid_coords
from geoforge.mesh import (GeometryError, TriangleMesh, is_watertight,
                           mesh_volume, normalize_mesh)
from geoforge.metrics import chamfer
from geoforge.remesh import (LABELING_FLOOD, RemeshConfig, RemeshResult,
                             compute_udf_grid, compute_visibility_labels,
                             exterior_flood_fill, fibonacci_directions,
                             label_points, remesh_watertight,
                             synthesize_signed_grid)
from geoforge.sampling import sample_surface

from oracles import brute_min_distances, scanline_sign_changes


# ---------------------------------------------------------------------------
# probe directions
# ---------------------------------------------------------------------------

def test_fibonacci_directions_unit_and_spread():
    for count in (6, 64, 501):
        dirs = fibonacci_directions(count)
        assert dirs.shape == (count, 3)
        assert np.abs(np.sqrt((dirs ** 2).sum(1)) - 1.0).max() < 1e-12
        # near-uniform: the mean direction of a balanced set stays small
        assert np.abs(dirs.mean(axis=0)).max() < 0.1


# ---------------------------------------------------------------------------
# UDF grid
# ---------------------------------------------------------------------------

def test_udf_tiny_triangle_corner_distance():
    eps = 1e-7
    mesh = TriangleMesh(
        vertices=[[0, 0, 0], [eps, 0, 0], [0, eps, 0]],
        triangles=[[0, 1, 2]])
    udf = compute_udf_grid(build_bvh(mesh), 9)
    assert udf.values[0, 0, 0] == pytest.approx(np.sqrt(3.0), abs=1e-6)
    assert udf.values[4, 4, 4] == pytest.approx(0.0, abs=eps)


def test_udf_matches_brute_force_icosphere():
    mesh = synth.icosphere(0.5, 2)
    udf = compute_udf_grid(build_bvh(mesh), 33)
    c = grid_coords(33)
    zz, yy, xx = np.meshgrid(c, c, c, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], 1)
    oracle = brute_min_distances(pts, mesh.vertices[mesh.triangles])
    assert np.abs(udf.values.ravel() - oracle).max() <= 1e-9


def test_udf_surface_near_some_corner():
    for mesh in (synth.icosphere(0.6, 1), synth.box((0.9, 0.5, 1.1))):
        udf = compute_udf_grid(build_bvh(mesh), 24)
        assert udf.values.min() <= udf.spacing


def test_udf_neighbor_lipschitz_bound():
    from oracles import random_soup
    udf = compute_udf_grid(build_bvh(random_soup(150, seed=2)), 24)
    v = udf.values
    h = udf.spacing
    for axis in range(3):
        d = np.abs(np.diff(v, axis=axis))
        assert d.max() <= h + 1e-12
    assert v.min() >= 0.0


# ---------------------------------------------------------------------------
# visibility labels
# ---------------------------------------------------------------------------

def test_visibility_center_of_closed_cube_inside():
    bvh = build_bvh(synth.box((1, 1, 1)))
    for directions in (6, 64):
        lab = label_points(bvh, np.array([[0.0, 0.0, 0.0]]), directions)
        assert lab[0] == 1


def test_visibility_point_outside_aabb_outside():
    bvh = build_bvh(synth.box((0.5, 0.5, 0.5)))
    lab = label_points(bvh, np.array([[0.9, 0.9, 0.9]]), 64)
    assert lab[0] == 0


def _hole_escape_directions(dirs, half, hole_half):
    """Directions escaping a centered box of half-extent ``half`` through
    a square hole of half-width ``hole_half`` centered in the +z face
    (exact ray geometry from the box center, no package code)."""
    out = []
    for d in dirs:
        ts = [half / abs(d[a]) if d[a] != 0.0 else np.inf for a in range(3)]
        t_exit = min(ts)
        exit_axis = int(np.argmin(ts))
        if exit_axis != 2 or d[2] <= 0.0:
            continue
        x, y = t_exit * d[0], t_exit * d[1]
        if abs(x) < hole_half and abs(y) < hole_half:
            out.append(d)
    return out


def test_sub_probe_hole_sealed_at_64_open_at_4096():
    half, hole_half = 0.5, 0.06
    mesh = synth.holed_box(
        size=(1.0, 1.0, 1.0),
        holes=((-hole_half, hole_half, -hole_half, hole_half),))
    bvh = build_bvh(mesh)
    center = np.array([[0.0, 0.0, 0.0]])
    # oracle: direct enumeration of probe directions through the hole
    esc64 = _hole_escape_directions(fibonacci_directions(64), half, hole_half)
    esc4096 = _hole_escape_directions(fibonacci_directions(4096), half,
                                      hole_half)
    assert len(esc64) == 0
    assert len(esc4096) >= 1
    assert label_points(bvh, center, 64)[0] == 1      # sealed: inside
    assert label_points(bvh, center, 4096)[0] == 0    # resolved: outside


def test_tau_monotonicity():
    mesh = synth.holed_box(size=(1.2, 1.0, 0.9),
                           holes=((-0.15, 0.15, -0.15, 0.15),))
    bvh = build_bvh(mesh)
    labels = [compute_visibility_labels(bvh, 24, 32, tau).labels
              for tau in (0.0, 0.1, 0.3)]
    for lo, hi in zip(labels, labels[1:]):
        # raising tau only moves points outside -> inside
        assert not np.any((lo == 1) & (hi == 0))


# ---------------------------------------------------------------------------
# exterior flood fill
# ---------------------------------------------------------------------------

def test_flood_matches_ray_labels_on_closed_cube():
    # cube walls engineered to fall between grid layers at R=32 so the
    # blocked band lies entirely inside the solid
    mesh = synth.box((1.1, 1.1, 1.1))
    bvh = build_bvh(mesh)
    udf = compute_udf_grid(bvh, 32)
    ray = compute_visibility_labels(bvh, 32, 64, 0.0)
    flood = exterior_flood_fill(udf, 0.5)
    assert np.array_equal(ray.labels, flood.labels)


def test_flood_slab_interior_inside():
    mesh = synth.box((1.8, 1.8, 0.3))
    udf = compute_udf_grid(build_bvh(mesh), 33)
    flood = exterior_flood_fill(udf, 0.5)
    c = grid_coords(33)
    mid = len(c) // 2
    assert flood.labels[mid, mid, mid] == 1          # inside the slab
    assert flood.labels[-1, mid, mid] == 0           # above it
    assert flood.labels[mid, 0, 0] == 0              # beside it


def test_flood_empty_scene_all_outside():
    udf = ScalarGrid(values=np.full((16, 16, 16), 2.0), kind=GRID_KIND_UDF)
    flood = exterior_flood_fill(udf, 0.5)
    assert flood.labels.sum() == 0


# ---------------------------------------------------------------------------
# signed synthesis
# ---------------------------------------------------------------------------

def test_signed_all_outside_equals_udf():
    from oracles import random_soup
    udf = compute_udf_grid(build_bvh(random_soup(40, seed=4)), 16)
    from geoforge.grids import LabelGrid
    outside = LabelGrid(labels=np.zeros((16, 16, 16), np.uint8))
    signed = synthesize_signed_grid(udf, outside)
    assert np.array_equal(signed.values, udf.values)


def test_signed_cube_sign_flips_once_per_crossing():
    mesh = synth.box((1.1, 1.1, 1.1))
    bvh = build_bvh(mesh)
    udf = compute_udf_grid(bvh, 32)
    labels = compute_visibility_labels(bvh, 32, 64)
    signed = synthesize_signed_grid(udf, labels)
    flips = scanline_sign_changes(signed.values)
    # rows hit the solid (2 flips: enter + leave) or miss it (0 flips)
    assert set(np.unique(flips)) <= {0, 2}
    c = grid_coords(32)
    through = np.abs(c) < 0.4
    assert (flips[np.ix_(through, through)] == 2).all()


def test_signed_resolution_mismatch():
    from geoforge.grids import LabelGrid
    udf = ScalarGrid(values=np.ones((8, 8, 8)), kind=GRID_KIND_UDF)
    labels = LabelGrid(labels=np.zeros((9, 9, 9), np.uint8))
    with pytest.raises(GeometryError):
        synthesize_signed_grid(udf, labels)


def test_shell_epsilon_gives_slab_volume():
    from geoforge.mcubes import marching_cubes
    sheet = synth.rect_sheet(1.0, 1.0, z=0.0)   # zero-thickness square
    bvh = build_bvh(sheet)
    res = 65
    udf = compute_udf_grid(bvh, res)
    labels = compute_visibility_labels(bvh, res, 16)
    plain = synthesize_signed_grid(udf, labels)
    assert marching_cubes(plain, 0.0).is_empty()  # sheets vanish without shell
    shelled = synthesize_signed_grid(udf, labels, shell_epsilon=1.0)
    mesh = marching_cubes(shelled, 0.0)
    h = udf.spacing
    expect = 2.0 * h * 1.0   # slab: 2*eps*h thickness times sheet area
    assert abs(mesh_volume(mesh) - expect) / expect <= 0.20
    assert is_watertight(mesh).watertight


def test_label_sign_consistency_off_surface():
    mesh = synth.icosphere(0.6, 1)
    bvh = build_bvh(mesh)
    udf = compute_udf_grid(bvh, 24)
    labels = compute_visibility_labels(bvh, 24, 32)
    signed = synthesize_signed_grid(udf, labels)
    off = udf.values > 0
    inside = labels.labels == 1
    assert ((signed.values[off] < 0) == inside[off]).all()


# ---------------------------------------------------------------------------
# full protocol
# ---------------------------------------------------------------------------

def test_remesh_icosphere_preserves_geometry():
    mesh = synth.icosphere(1.0, 3)
    result = remesh_watertight(mesh, RemeshConfig(grid_res=64))
    assert is_watertight(result.mesh).watertight
    h = 2.0 / 63
    norm, _ = normalize_mesh(mesh)
    cloud_in = sample_surface(norm, 8192, seed=1)
    cloud_out = sample_surface(result.mesh, 8192, seed=2)
    assert chamfer(cloud_in, cloud_out) <= 1.5 * h
    vol_in = mesh_volume(norm)
    vol_out = result.stats["output_volume"]
    assert abs(vol_out - vol_in) / vol_in <= 0.02


def test_remesh_open_back_box_keeps_volume():
    holes = ((-0.03, 0.005, -0.03, 0.005), (0.25, 0.285, 0.25, 0.285))
    open_mesh = synth.holed_box(size=(1.4, 1.2, 1.0), holes=holes)
    sealed = synth.box((1.4, 1.2, 1.0))
    cfg = RemeshConfig(grid_res=64, directions=64, escape_threshold=0.0)
    r_open = remesh_watertight(open_mesh, cfg)
    r_sealed = remesh_watertight(sealed, cfg)
    assert is_watertight(r_open.mesh).watertight
    ratio = r_open.stats["output_volume"] / r_sealed.stats["output_volume"]
    assert ratio >= 0.90
    # interior grid points labeled inside, like the sealed variant
    assert (r_open.stats["inside_fraction"]
            >= 0.90 * r_sealed.stats["inside_fraction"])


def test_remesh_flood_mode():
    mesh = synth.icosphere(1.0, 1)
    cfg = RemeshConfig(grid_res=32, labeling_mode=LABELING_FLOOD)
    result = remesh_watertight(mesh, cfg)
    assert is_watertight(result.mesh).watertight
    assert result.stats["output_volume"] > 0


def test_remesh_errors():
    empty = TriangleMesh(vertices=np.zeros((0, 3)),
                         triangles=np.zeros((0, 3), np.int64))
    with pytest.raises(GeometryError):
        remesh_watertight(empty)
    # a bare sheet has no obscured region: the field never goes negative
    with pytest.raises(GeometryError, match="empty output"):
        remesh_watertight(synth.rect_sheet(), RemeshConfig(grid_res=16,
                                                           directions=8))


def test_remesh_config_validation():
    with pytest.raises(GeometryError):
        RemeshConfig(grid_res=4)
    with pytest.raises(GeometryError):
        RemeshConfig(directions=2)
    with pytest.raises(GeometryError):
        RemeshConfig(escape_threshold=1.0)
    with pytest.raises(GeometryError):
        RemeshConfig(labeling_mode="magic")


def test_remesh_deterministic():
    mesh = synth.torus(major_segments=16, minor_segments=8)
    cfg = RemeshConfig(grid_res=24, directions=16)
    a = remesh_watertight(mesh, cfg)
    b = remesh_watertight(mesh, cfg)
    assert np.array_equal(a.signed_grid.values, b.signed_grid.values)
    assert np.array_equal(a.label_grid.labels, b.label_grid.labels)
    assert np.array_equal(a.mesh.vertices, b.mesh.vertices)
    assert np.array_equal(a.mesh.triangles, b.mesh.triangles)


def test_remesh_domain_corners_labeled_outside():
    result = remesh_watertight(synth.icosphere(1.0, 1),
                               RemeshConfig(grid_res=24, directions=16))
    lab = result.label_grid.labels
    corners = [lab[i, j, k] for i in (0, -1) for j in (0, -1) for k in (0, -1)]
    assert not any(corners)


def test_remesh_stats_populated():
    result = remesh_watertight(synth.box((1, 0.8, 0.6), skip_faces=()),
                               RemeshConfig(grid_res=24, directions=16))
    stats = result.stats
    assert stats["input_boundary_edges"] == 0
    assert stats["input_watertight"] is True
    assert 0 < stats["inside_fraction"] < 1
    assert stats["output_volume"] > 0
    assert stats["seconds"] > 0
    assert isinstance(result, RemeshResult)
