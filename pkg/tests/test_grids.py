import numpy as np
import pytest

from geoforge.grids import (GRID_KIND_SIGNED, GRID_KIND_UDF, LabelGrid,
                            ScalarGrid, dump_grid, grid_coords, load_grid)
from geoforge.mesh import GeometryError


def test_scalar_grid_validation():
    with pytest.raises(GeometryError):
        ScalarGrid(values=np.zeros((4, 4, 3)))
    with pytest.raises(GeometryError):
        ScalarGrid(values=np.full((4, 4, 4), np.nan))
    with pytest.raises(GeometryError):
        ScalarGrid(values=-np.ones((4, 4, 4)), kind=GRID_KIND_UDF)
    # signed grids may go negative
    ScalarGrid(values=-np.ones((4, 4, 4)), kind=GRID_KIND_SIGNED)


def test_spacing_and_coords():
    g = ScalarGrid(values=np.zeros((9, 9, 9)))
    assert g.spacing == pytest.approx(0.25)
    c = grid_coords(9)
    assert c[0] == -1.0 and c[-1] == pytest.approx(1.0)


def test_trilinear_reproduces_linear_fields(rng):
    # trilinear interpolation is exact on affine functions
    res = 17
    c = grid_coords(res)
    zz, yy, xx = np.meshgrid(c, c, c, indexing="ij")
    field = 0.3 * xx - 0.7 * yy + 0.2 * zz + 0.1
    g = ScalarGrid(values=field, kind=GRID_KIND_SIGNED)
    pts = rng.uniform(-1, 1, size=(500, 3))
    expect = 0.3 * pts[:, 0] - 0.7 * pts[:, 1] + 0.2 * pts[:, 2] + 0.1
    assert np.abs(g.trilinear(pts) - expect).max() < 1e-12


def test_trilinear_at_grid_points():
    res = 9
    rng = np.random.default_rng(5)
    field = rng.random((res, res, res))
    g = ScalarGrid(values=field, kind=GRID_KIND_SIGNED)
    c = grid_coords(res)
    pts = np.array([[c[i], c[j], c[k]]
                    for i, j, k in [(0, 0, 0), (3, 5, 2), (8, 8, 8)]])
    vals = g.trilinear(pts)
    assert vals[0] == pytest.approx(field[0, 0, 0], abs=1e-12)
    assert vals[1] == pytest.approx(field[2, 5, 3], abs=1e-12)
    assert vals[2] == pytest.approx(field[8, 8, 8], abs=1e-12)


def test_label_grid_validation():
    with pytest.raises(GeometryError):
        LabelGrid(labels=np.full((4, 4, 4), 2, np.uint8))
    g = LabelGrid(labels=np.ones((4, 4, 4), np.uint8))
    assert g.inside_fraction == 1.0


def test_clgd_roundtrip_scalar(tmp_path):
    rng = np.random.default_rng(1)
    field = rng.random((6, 6, 6))
    g = ScalarGrid(values=field, kind=GRID_KIND_SIGNED)
    path = tmp_path / "g.clgd"
    dump_grid(path, g)
    back = load_grid(path)
    assert back.kind == GRID_KIND_SIGNED
    assert back.resolution == 6
    # dump quantizes to float32
    assert np.abs(back.values - field.astype(np.float32)).max() == 0.0


def test_clgd_roundtrip_labels(tmp_path):
    rng = np.random.default_rng(2)
    labels = (rng.random((5, 5, 5)) < 0.5).astype(np.uint8)
    path = tmp_path / "l.clgd"
    dump_grid(path, LabelGrid(labels=labels))
    back = load_grid(path)
    assert isinstance(back, LabelGrid)
    assert np.array_equal(back.labels, labels)


def test_clgd_rejects_garbage(tmp_path):
    path = tmp_path / "bad.clgd"
    path.write_bytes(b"NOPE" + b"\0" * 16)
    with pytest.raises(GeometryError):
        load_grid(path)
