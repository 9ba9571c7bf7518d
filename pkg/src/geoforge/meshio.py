"""OBJ and PLY readers/writers.

Readers accept OBJ (v/f records, everything else ignored) and PLY in
ascii or binary little-endian form.  Polygon faces are fan-triangulated
from their first vertex; degenerate triangles are dropped and counted.
Writers emit OBJ text or binary little-endian PLY with float32 vertices.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import GeometryError, TriangleMesh, drop_degenerate


class MeshFormatError(GeometryError):
    """Unreadable or unsupported mesh file."""


@dataclass(frozen=True)
class MeshLoadResult:
    mesh: TriangleMesh
    dropped_triangles: int
    format: str


def _fan(indices: list[int]) -> list[tuple[int, int, int]]:
    return [(indices[0], indices[i], indices[i + 1])
            for i in range(1, len(indices) - 1)]


# ---------------------------------------------------------------------------
# OBJ
# ---------------------------------------------------------------------------

def _read_obj(path: Path):
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    with open(path, "r", errors="replace") as fh:
        for line in fh:
            if line.startswith("v "):
                parts = line.split()
                if len(parts) < 4:
                    raise MeshFormatError(f"bad vertex record: {line.strip()!r}")
                verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
            elif line.startswith("f "):
                ids = []
                for token in line.split()[1:]:
                    raw = token.split("/")[0]
                    if not raw:
                        continue
                    i = int(raw)
                    ids.append(i - 1 if i > 0 else len(verts) + i)
                if len(ids) >= 3:
                    tris.extend(_fan(ids))
    return np.asarray(verts, dtype=np.float64).reshape(-1, 3), \
        np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def save_obj(path, mesh: TriangleMesh) -> None:
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _read_ply(path: Path):
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"ply":
            raise MeshFormatError("missing ply magic")
        fmt = None
        elements: list[tuple[str, int, list]] = []  # (name, count, props)
        while True:
            line = fh.readline()
            if not line:
                raise MeshFormatError("unterminated ply header")
            words = line.decode("ascii", errors="replace").split()
            if not words or words[0] == "comment":
                continue
            if words[0] == "format":
                fmt = words[1]
            elif words[0] == "element":
                elements.append((words[1], int(words[2]), []))
            elif words[0] == "property":
                if not elements:
                    raise MeshFormatError("property before element")
                if words[1] == "list":
                    elements[-1][2].append(("list", words[2], words[3], words[4]))
                else:
                    elements[-1][2].append(("scalar", words[1], words[2]))
            elif words[0] == "end_header":
                break
        if fmt not in ("ascii", "binary_little_endian"):
            raise MeshFormatError(f"unsupported ply format: {fmt}")
        verts = np.zeros((0, 3))
        tris: list[tuple[int, int, int]] = []
        for name, count, props in elements:
            if fmt == "ascii":
                rows = [fh.readline().split() for _ in range(count)]
                if name == "vertex":
                    cols = [p[2] for p in props if p[0] == "scalar"]
                    ix, iy, iz = cols.index("x"), cols.index("y"), cols.index("z")
                    verts = np.array(
                        [[float(r[ix]), float(r[iy]), float(r[iz])] for r in rows],
                        dtype=np.float64).reshape(-1, 3)
                elif name == "face":
                    for r in rows:
                        n = int(r[0])
                        ids = [int(x) for x in r[1:1 + n]]
                        if n >= 3:
                            tris.extend(_fan(ids))
            else:
                if name == "vertex":
                    fields = []
                    for j, p in enumerate(props):
                        if p[0] != "scalar":
                            raise MeshFormatError("list property on vertices")
                        fields.append((f"p{j}", "<" + _PLY_TYPES[p[1]]))
                    dt = np.dtype(fields)
                    data = np.frombuffer(fh.read(dt.itemsize * count), dtype=dt)
                    names = [p[2] for p in props]
                    verts = np.stack(
                        [data[f"p{names.index(ax)}"].astype(np.float64)
                         for ax in ("x", "y", "z")], axis=1)
                elif name == "face":
                    lp = next(p for p in props if p[0] == "list")
                    if len(props) != 1:
                        raise MeshFormatError("extra face properties unsupported")
                    cnt_dt = np.dtype("<" + _PLY_TYPES[lp[1]])
                    idx_dt = np.dtype("<" + _PLY_TYPES[lp[2]])
                    rec = cnt_dt.itemsize + 3 * idx_dt.itemsize
                    blob = fh.read()
                    if len(blob) == rec * count:
                        counts = np.frombuffer(blob, dtype=cnt_dt,
                                               count=count,
                                               offset=0)[::1] if count else []
                        # fast path only valid when every face is a triangle
                        stride_ok = count == 0 or bool(
                            (np.frombuffer(blob, dtype=np.uint8)
                             .reshape(count, rec)[:, :cnt_dt.itemsize]
                             .view(cnt_dt).ravel() == 3).all())
                    else:
                        stride_ok = False
                    if stride_ok and count:
                        raw = (np.frombuffer(blob, dtype=np.uint8)
                               .reshape(count, rec)[:, cnt_dt.itemsize:])
                        tris = list(map(tuple, np.ascontiguousarray(raw)
                                        .view(idx_dt).reshape(count, 3)
                                        .astype(np.int64)))
                    else:
                        off = 0
                        for _ in range(count):
                            n = int(np.frombuffer(
                                blob, dtype=cnt_dt, count=1, offset=off)[0])
                            off += cnt_dt.itemsize
                            ids = np.frombuffer(
                                blob, dtype=idx_dt, count=n, offset=off)
                            off += n * idx_dt.itemsize
                            if n >= 3:
                                tris.extend(_fan([int(x) for x in ids]))
                else:
                    # skip unknown fixed-size element
                    size = sum(np.dtype(_PLY_TYPES[p[1]]).itemsize
                               for p in props if p[0] == "scalar")
                    fh.read(size * count)
        return verts, np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def save_ply(path, mesh: TriangleMesh) -> None:
    v = mesh.vertices.astype("<f4")
    t = mesh.triangles.astype("<i4")
    with open(path, "wb") as fh:
        fh.write(b"ply\nformat binary_little_endian 1.0\n")
        fh.write(f"element vertex {len(v)}\n".encode())
        fh.write(b"property float x\nproperty float y\nproperty float z\n")
        fh.write(f"element face {len(t)}\n".encode())
        fh.write(b"property list uchar int vertex_indices\nend_header\n")
        fh.write(v.tobytes())
        rec = np.empty(len(t), dtype=[("n", "u1"), ("idx", "<i4", 3)])
        rec["n"] = 3
        rec["idx"] = t
        fh.write(rec.tobytes())


# ---------------------------------------------------------------------------
# front door
# ---------------------------------------------------------------------------

def read_mesh(path) -> MeshLoadResult:
    """Load a mesh file, dropping and counting degenerate triangles."""
    path = Path(path)
    if not path.exists():
        raise MeshFormatError(f"no such file: {path}")
    suffix = path.suffix.lower()
    try:
        if suffix == ".obj":
            verts, tris, fmt = *_read_obj(path), "obj"
        elif suffix == ".ply":
            verts, tris, fmt = *_read_ply(path), "ply"
        else:
            raise MeshFormatError(f"unsupported mesh format: {suffix!r}")
    except (ValueError, IndexError, struct.error) as exc:
        raise MeshFormatError(f"failed to parse {path}: {exc}") from exc
    if verts.size and not np.isfinite(verts).all():
        raise MeshFormatError(f"{path}: non-finite vertex coordinates")
    if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
        raise MeshFormatError(f"{path}: face index out of range")
    tris, dropped = drop_degenerate(verts, tris)
    if len(tris) == 0:
        raise MeshFormatError(f"{path}: zero valid triangles")
    mesh = TriangleMesh(vertices=verts, triangles=tris, provenance=str(path))
    return MeshLoadResult(mesh=mesh, dropped_triangles=dropped, format=fmt)


def load_mesh(path) -> TriangleMesh:
    return read_mesh(path).mesh


def save_mesh(path, mesh: TriangleMesh) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        save_obj(path, mesh)
    elif suffix == ".ply":
        save_ply(path, mesh)
    else:
        raise MeshFormatError(f"unsupported output format: {suffix!r}")
