import numpy as np
import pytest

from geoforge.grids import GRID_KIND_SIGNED, ScalarGrid, grid_coords
from geoforge.mcubes import marching_cubes
from geoforge.mesh import is_watertight, mesh_volume, triangle_areas

from oracles import cube_field, sphere_field


def _grid(values):
    return ScalarGrid(values=values, kind=GRID_KIND_SIGNED)


def test_sphere_area_and_volume():
    mesh = marching_cubes(_grid(sphere_field(65, 0.5)), 0.0)
    report = is_watertight(mesh)
    assert report.watertight and report.boundary_edges == 0
    area = triangle_areas(mesh).sum()
    volume = mesh_volume(mesh)
    assert abs(area - np.pi) / np.pi < 0.02          # 4*pi*r^2, r=0.5
    assert abs(volume - np.pi / 6) / (np.pi / 6) < 0.02  # (4/3)*pi*r^3


def test_uniform_positive_empty():
    mesh = marching_cubes(_grid(np.ones((9, 9, 9))), 0.0)
    assert mesh.is_empty()


def test_cube_field_volume():
    mesh = marching_cubes(_grid(cube_field(65, 0.5)), 0.0)
    report = is_watertight(mesh)
    assert report.watertight and report.boundary_edges == 0
    assert abs(mesh_volume(mesh) - 1.0) < 0.02


def test_iso_level_shifts_surface():
    # extracting |p| - 0.5 at iso=t is the sphere of radius 0.5 + t
    mesh = marching_cubes(_grid(sphere_field(65, 0.5)), 0.1)
    expect = (4 / 3) * np.pi * 0.6 ** 3
    assert abs(mesh_volume(mesh) - expect) / expect < 0.02


def test_vertices_welded_exactly():
    mesh = marching_cubes(_grid(sphere_field(33, 0.5)), 0.0)
    # closed 2-manifold: V - E + F = 2 (genus 0), E = 3F/2
    nf = mesh.n_triangles
    ne = is_watertight(mesh).edge_count
    assert ne * 2 == nf * 3
    assert mesh.n_vertices - ne + nf == 2


def test_manifold_for_random_smooth_fields(rng):
    c = grid_coords(33)
    zz, yy, xx = np.meshgrid(c, c, c, indexing="ij")
    for trial in range(5):
        coef = rng.normal(size=6)
        field = (0.35 - np.sqrt(xx ** 2 + yy ** 2 + zz ** 2)
                 + 0.15 * np.sin(3 * coef[0] * xx + coef[1])
                 * np.cos(3 * coef[2] * yy + coef[3])
                 * np.sin(3 * coef[4] * zz + coef[5]))
        field = -field  # inside negative blob, positive at the boundary
        mesh = marching_cubes(_grid(field), 0.0)
        if mesh.is_empty():
            continue
        report = is_watertight(mesh)
        assert report.watertight, (trial, report)


def test_interpolation_positions_on_iso():
    # along each crossed edge the linear field interpolates to iso
    field = sphere_field(17, 0.5)
    mesh = marching_cubes(_grid(field), 0.0)
    g = _grid(field)
    vals = g.trilinear(mesh.vertices)
    # vertices sit on grid edges so trilinear degenerates to the linear
    # interpolation used by the extractor
    assert np.abs(vals).max() < 1e-9


def test_empty_grid_roundtrip():
    mesh = marching_cubes(_grid(np.full((8, 8, 8), 3.0)), 0.0)
    assert mesh.n_vertices == 0 and mesh.n_triangles == 0
