import numpy as np
import pytest

from geoforge import synth
from geoforge.bvh import (any_ray_escape, build_bvh, closest_point,
                          closest_point_many)
from geoforge.mesh import GeometryError, TriangleMesh

from oracles import brute_min_distances, closest_on_triangle, random_soup


def _leaf_census(bvh):
    """All triangle slots reachable through leaves, in traversal order."""
    seen = []
    stack = [0]
    while stack:
        node = stack.pop()
        if bvh.leaf[node]:
            seen.extend(range(bvh.left[node], bvh.left[node] + bvh.right[node]))
        else:
            stack.extend((bvh.left[node], bvh.right[node]))
    return seen


def test_single_triangle_single_leaf():
    mesh = TriangleMesh(vertices=[[0, 0, 0], [1, 0, 0], [0, 1, 0]],
                        triangles=[[0, 1, 2]])
    bvh = build_bvh(mesh)
    assert bvh.n_nodes == 1
    assert bvh.leaf[0] == 1


def test_cube_census_every_triangle_once():
    bvh = build_bvh(synth.unit_cube(), leaf_size=4)
    census = _leaf_census(bvh)
    assert sorted(census) == list(range(12))
    assert sorted(bvh.tri_order.tolist()) == list(range(12))


def test_build_rejects_bad_input():
    with pytest.raises(GeometryError):
        build_bvh(synth.unit_cube(), leaf_size=0)


def test_aabb_containment_random_soup():
    mesh = random_soup(10_000, seed=3)
    bvh = build_bvh(mesh, leaf_size=8)
    tv = bvh.tri_verts
    # gather triangle ranges per node by walking the tree
    stack = [(0, None)]
    ranges = {}
    order = {}

    def node_range(node):
        if node in ranges:
            return ranges[node]
        if bvh.leaf[node]:
            r = (bvh.left[node], bvh.left[node] + bvh.right[node])
        else:
            l0, l1 = node_range(bvh.left[node])
            r0, r1 = node_range(bvh.right[node])
            r = (min(l0, r0), max(l1, r1))
        ranges[node] = r
        return r

    import sys
    sys.setrecursionlimit(100_000)
    for node in range(bvh.n_nodes):
        lo, hi = node_range(node)
        pts = tv[lo:hi].reshape(-1, 3)
        assert (pts >= bvh.bmin[node] - 1e-12).all()
        assert (pts <= bvh.bmax[node] + 1e-12).all()


def test_tree_depth_bound():
    mesh = random_soup(5000, seed=9)
    bvh = build_bvh(mesh, leaf_size=1)
    depth = {0: 1}
    worst = 1
    for node in range(bvh.n_nodes):
        if not bvh.leaf[node]:
            for child in (bvh.left[node], bvh.right[node]):
                depth[child] = depth[node] + 1
                worst = max(worst, depth[child])
    assert worst <= 64


def test_closest_point_analytic_triangle():
    mesh = TriangleMesh(vertices=[[0, 0, 0], [1, 0, 0], [0, 1, 0]],
                        triangles=[[0, 1, 2]])
    bvh = build_bvh(mesh)
    d, tri, foot = closest_point(bvh, [0, 0, 1])
    assert d == pytest.approx(1.0, abs=1e-12)
    assert tri == 0
    assert np.allclose(foot, [0, 0, 0], atol=1e-12)

    d, _, foot = closest_point(bvh, [2, 0, 0])
    assert d == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(foot, [1, 0, 0], atol=1e-12)


def test_closest_point_matches_brute_force(rng):
    mesh = random_soup(100, seed=11)
    bvh = build_bvh(mesh, leaf_size=4)
    points = rng.uniform(-1, 1, size=(1000, 3))
    dist, _, foot = closest_point_many(bvh, points)
    oracle = brute_min_distances(points, mesh.vertices[mesh.triangles])
    assert np.abs(dist - oracle).max() <= 1e-9
    # the foot must realize the reported distance
    foot_d = np.sqrt(((points - foot) ** 2).sum(axis=1))
    assert np.abs(foot_d - dist).max() <= 1e-9


def test_foot_lies_on_reported_triangle(rng):
    mesh = random_soup(50, seed=21)
    bvh = build_bvh(mesh)
    points = rng.uniform(-1, 1, size=(200, 3))
    dist, tri, foot = closest_point_many(bvh, points)
    tv = mesh.vertices[mesh.triangles[tri]]
    for i in range(len(points)):
        d_ref, q_ref = closest_on_triangle(foot[i], *tv[i])
        assert d_ref <= 1e-9  # foot is on that triangle


def test_lipschitz_property(rng):
    mesh = random_soup(60, seed=5)
    bvh = build_bvh(mesh)
    a = rng.uniform(-1, 1, size=(500, 3))
    b = a + rng.normal(0, 0.05, size=a.shape)
    b = np.clip(b, -1, 1)
    da, _, _ = closest_point_many(bvh, a)
    db, _, _ = closest_point_many(bvh, b)
    gap = np.sqrt(((a - b) ** 2).sum(axis=1))
    assert (np.abs(da - db) <= gap + 1e-12).all()


def test_leaf_size_invariance(rng):
    mesh = random_soup(300, seed=7)
    points = rng.uniform(-1, 1, size=(400, 3))
    dists = []
    for leaf_size in (1, 4, 16):
        bvh = build_bvh(mesh, leaf_size=leaf_size)
        dists.append(closest_point_many(bvh, points)[0])
    assert np.abs(dists[0] - dists[1]).max() <= 1e-12
    assert np.abs(dists[0] - dists[2]).max() <= 1e-12


def test_ray_escape_cases():
    cube = synth.box((1, 1, 1))
    bvh = build_bvh(cube)
    for axis in range(3):
        for sign in (1.0, -1.0):
            d = np.zeros(3)
            d[axis] = sign
            assert not any_ray_escape(bvh, [0, 0, 0], d)
    # origin outside the AABB, pointing away
    assert any_ray_escape(bvh, [2, 0, 0], [1, 0, 0])
    # open-top box: straight up through the opening
    open_box = synth.box((1, 1, 1), skip_faces=("+z",))
    bvh_open = build_bvh(open_box)
    assert any_ray_escape(bvh_open, [0, 0, 0], [0, 0, 1])
    assert not any_ray_escape(bvh_open, [0, 0, 0], [0, 0, -1])


def test_ray_escape_validates_direction():
    bvh = build_bvh(synth.unit_cube())
    with pytest.raises(GeometryError):
        any_ray_escape(bvh, [0, 0, 0], [1, 1, 0])


def test_ray_escape_monotone_under_subset(rng):
    full = random_soup(80, seed=13)
    # subset: drop half the triangles
    sub = TriangleMesh(vertices=full.vertices,
                       triangles=full.triangles[::2])
    bvh_full = build_bvh(full)
    bvh_sub = build_bvh(sub)
    for _ in range(300):
        o = rng.uniform(-1, 1, 3)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        esc_full = any_ray_escape(bvh_full, o, d)
        esc_sub = any_ray_escape(bvh_sub, o, d)
        # adding triangles can only block more rays
        if esc_full:
            assert esc_sub


def test_t_min_ignores_near_hits():
    mesh = TriangleMesh(vertices=[[-1, -1, 0], [1, -1, 0], [0, 1, 0]],
                        triangles=[[0, 1, 2]])
    bvh = build_bvh(mesh)
    # origin on the triangle plane: the t=0 self-hit must not block
    assert any_ray_escape(bvh, [0, 0, 0], [0, 0, 1], t_min=1e-4)
    # shifted slightly below, the triangle blocks upward rays
    assert not any_ray_escape(bvh, [0, 0, -0.01], [0, 0, 1], t_min=1e-4)
