"""Pure-numpy fallback kernels.

Mirrors every public function of ``numba_backend`` with vectorized
implementations that use the same elementwise arithmetic, so results
match the JIT path bit for bit.  This path favors simplicity over
throughput: ray queries fall back to brute force over all triangles and
are only practical at test-scale resolutions.
"""

import numpy as np

BACKEND_NAME = "numpy"

_TRI_CHUNK = 1 << 20  # cap on points*triangles per vectorized ray batch


# ---------------------------------------------------------------------------
# closest point
# ---------------------------------------------------------------------------

def _box_dist2(points, mn, mx):
    lo = np.maximum(mn - points, 0.0)
    hi = np.maximum(points - mx, 0.0)
    per_axis = lo * lo + hi * hi
    return (per_axis[:, 0] + per_axis[:, 1]) + per_axis[:, 2]


def _tri_closest(p, a, b, c):
    """Vectorized closest point on triangle; same region order as the
    scalar kernel so selected branches compute identical floats."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = (ab * ap).sum(axis=-1)
    d2 = (ac * ap).sum(axis=-1)
    bp = p - b
    d3 = (ab * bp).sum(axis=-1)
    d4 = (ac * bp).sum(axis=-1)
    cp = p - c
    d5 = (ab * cp).sum(axis=-1)
    d6 = (ac * cp).sum(axis=-1)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = (d1 / (d1 - d3))[..., None]
        w_ac = (d2 / (d2 - d6))[..., None]
        w_bc = ((d4 - d3) / ((d4 - d3) + (d5 - d6)))[..., None]
        s = va + vb + vc
        denom = 1.0 / s
        v_in = (vb * denom)[..., None]
        w_in = (vc * denom)[..., None]
        interior = a + ab * v_in + ac * w_in
    conds = [
        (d1 <= 0.0) & (d2 <= 0.0),
        (d3 >= 0.0) & (d4 <= d3),
        (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0),
        (d6 >= 0.0) & (d5 <= d6),
        (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0),
        (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0),
        s <= 0.0,
    ]
    cands = [
        np.broadcast_to(a, p.shape),
        np.broadcast_to(b, p.shape),
        a + v_ab * ab,
        np.broadcast_to(c, p.shape),
        a + w_ac * ac,
        b + w_bc * (c - b),
        np.broadcast_to(a, p.shape),
    ]
    foot = interior.copy()
    taken = np.zeros(p.shape[:-1], dtype=bool)
    for cond, cand in zip(conds, cands):
        sel = cond & ~taken
        if sel.any():
            foot[sel] = cand[sel]
            taken |= cond
    return foot


def closest_point_batch(points, bmin, bmax, left, right, leaf, tv):
    n = points.shape[0]
    best2 = np.full(n, np.inf)
    btri = np.full(n, -1, np.int64)
    foot = np.zeros((n, 3))
    stack = [(0, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        d2 = _box_dist2(points[idx], bmin[node], bmax[node])
        idx = idx[d2 < best2[idx]]
        if idx.size == 0:
            continue
        if leaf[node]:
            pts = points[idx]
            for t in range(left[node], left[node] + right[node]):
                f = _tri_closest(pts, tv[t, 0], tv[t, 1], tv[t, 2])
                diff = pts - f
                d2 = (diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1]
                      + diff[:, 2] * diff[:, 2])
                upd = d2 < best2[idx]
                hit = idx[upd]
                best2[hit] = d2[upd]
                btri[hit] = t
                foot[hit] = f[upd]
        else:
            stack.append((right[node], idx))
            stack.append((left[node], idx))
    return np.sqrt(best2), btri, foot


def _grid_points(res):
    h = 2.0 / (res - 1)
    coords = -1.0 + np.arange(res) * h
    zz, yy, xx = np.meshgrid(coords, coords, coords, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)


def udf_grid(res, bmin, bmax, left, right, leaf, tv):
    vals = np.empty((res, res, res))
    h = 2.0 / (res - 1)
    coords = -1.0 + np.arange(res) * h
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    slab = np.empty((res * res, 3))
    slab[:, 0] = xx.ravel()
    slab[:, 1] = yy.ravel()
    for iz in range(res):
        slab[:, 2] = coords[iz]
        d, _, _ = closest_point_batch(slab, bmin, bmax, left, right, leaf, tv)
        vals[iz] = d.reshape(res, res)
    return vals


# ---------------------------------------------------------------------------
# ray casting (brute force over triangles)
# ---------------------------------------------------------------------------

def _ray_setup(d):
    k = int(np.argmax(np.abs(d)))
    kx = (k + 1) % 3
    ky = (kx + 1) % 3
    if d[k] < 0.0:
        kx, ky = ky, kx
    return kx, ky, k, d[kx] / d[k], d[ky] / d[k], 1.0 / d[k]


def _ray_tri_hits(origins, d, t_min, tv):
    """(n_origins, n_tris) hit mask for one shared direction."""
    kx, ky, kz, sx, sy, sz = _ray_setup(d)
    av = tv[:, 0, :]
    bv = tv[:, 1, :]
    cv = tv[:, 2, :]
    n = origins.shape[0]
    ntri = tv.shape[0]
    out = np.zeros((n, ntri), dtype=bool)
    step = max(1, _TRI_CHUNK // max(n, 1))
    for t0 in range(0, ntri, step):
        t1 = min(ntri, t0 + step)
        axz = av[None, t0:t1, kz] - origins[:, None, kz]
        bxz = bv[None, t0:t1, kz] - origins[:, None, kz]
        cxz = cv[None, t0:t1, kz] - origins[:, None, kz]
        ax_ = (av[None, t0:t1, kx] - origins[:, None, kx]) - sx * axz
        ay_ = (av[None, t0:t1, ky] - origins[:, None, ky]) - sy * axz
        bx_ = (bv[None, t0:t1, kx] - origins[:, None, kx]) - sx * bxz
        by_ = (bv[None, t0:t1, ky] - origins[:, None, ky]) - sy * bxz
        cx_ = (cv[None, t0:t1, kx] - origins[:, None, kx]) - sx * cxz
        cy_ = (cv[None, t0:t1, ky] - origins[:, None, ky]) - sy * cxz
        u = cx_ * by_ - cy_ * bx_
        v = ax_ * cy_ - ay_ * cx_
        w = bx_ * ay_ - by_ * ax_
        neg = (u < 0.0) | (v < 0.0) | (w < 0.0)
        pos = (u > 0.0) | (v > 0.0) | (w > 0.0)
        det = u + v + w
        with np.errstate(divide="ignore", invalid="ignore"):
            tpar = (u * (sz * axz) + v * (sz * bxz) + w * (sz * cxz)) / det
        out[:, t0:t1] = ~(neg & pos) & (det != 0.0) & (tpar > t_min)
    return out


def ray_hit_triangle(o, d, t_min, bmin, bmax, left, right, leaf, tv):
    hits = _ray_tri_hits(o[None, :], np.asarray(d, dtype=np.float64),
                         t_min, tv)[0]
    where = np.nonzero(hits)[0]
    return np.int64(where[0]) if where.size else np.int64(-1)


def visibility_labels_points(points, dirs, t_min, tau,
                             bmin, bmax, left, right, leaf, tv):
    n = points.shape[0]
    ndir = dirs.shape[0]
    thresh = tau * ndir
    esc = np.zeros(n, np.int64)
    undecided = np.ones(n, dtype=bool)
    for k in range(ndir):
        act = np.nonzero(undecided)[0]
        if act.size == 0:
            break
        hit = _ray_tri_hits(points[act], dirs[k], t_min, tv).any(axis=1)
        esc[act] += ~hit
        remaining = ndir - 1 - k
        undecided[act] = ~((esc[act] > thresh)
                           | (esc[act] + remaining <= thresh))
    return (esc <= thresh).astype(np.uint8)


def visibility_labels(res, dirs, t_min, tau,
                      bmin, bmax, left, right, leaf, tv):
    pts = _grid_points(res)
    labels = visibility_labels_points(pts, dirs, t_min, tau,
                                      bmin, bmax, left, right, leaf, tv)
    return labels.reshape(res, res, res)


# ---------------------------------------------------------------------------
# flood fill
# ---------------------------------------------------------------------------

def flood_reached(open_mask):
    om = open_mask.astype(bool)
    reached = np.zeros_like(om)
    for axis in range(3):
        sl0 = [slice(None)] * 3
        sl1 = [slice(None)] * 3
        sl0[axis] = 0
        sl1[axis] = -1
        reached[tuple(sl0)] |= om[tuple(sl0)]
        reached[tuple(sl1)] |= om[tuple(sl1)]
    while True:
        grown = reached.copy()
        grown[1:, :, :] |= reached[:-1, :, :]
        grown[:-1, :, :] |= reached[1:, :, :]
        grown[:, 1:, :] |= reached[:, :-1, :]
        grown[:, :-1, :] |= reached[:, 1:, :]
        grown[:, :, 1:] |= reached[:, :, :-1]
        grown[:, :, :-1] |= reached[:, :, 1:]
        grown &= om
        if np.array_equal(grown, reached):
            return reached.astype(np.uint8)
        reached = grown


# ---------------------------------------------------------------------------
# marching cubes passes
# ---------------------------------------------------------------------------

def mc_classify(values, iso, rowlen):
    inside = (values < iso).astype(np.uint8)
    ci = (inside[:-1, :-1, :-1]
          | inside[:-1, :-1, 1:] << 1
          | inside[:-1, 1:, 1:] << 2
          | inside[:-1, 1:, :-1] << 3
          | inside[1:, :-1, :-1] << 4
          | inside[1:, :-1, 1:] << 5
          | inside[1:, 1:, 1:] << 6
          | inside[1:, 1:, :-1] << 7)
    return ci, rowlen[ci]


def mc_emit(cubeidx, counts, offsets, tri_table,
            edge_axis, edge_dx, edge_dy, edge_dz, res):
    ncell = res - 1
    flat_counts = counts.ravel()
    flat_ci = cubeidx.ravel()
    total = int(offsets[-1])
    keys = np.empty(total * 3, np.int64)
    cells = np.nonzero(flat_counts)[0]
    if cells.size == 0:
        return keys
    r2 = res * res
    max_rows = int(flat_counts[cells].max())
    for s in range(max_rows):
        sel = cells[flat_counts[cells] > s]
        edges = tri_table[flat_ci[sel], 3 * s:3 * s + 3]  # (m, 3) local ids
        ix = sel % ncell
        iy = (sel // ncell) % ncell
        iz = sel // (ncell * ncell)
        px = ix[:, None] + edge_dx[edges]
        py = iy[:, None] + edge_dy[edges]
        pz = iz[:, None] + edge_dz[edges]
        k = edge_axis[edges] * res * r2 + (pz * res + py) * res + px
        slots = (offsets[sel] + s) * 3
        for j in range(3):
            keys[slots + j] = k[:, j]
    return keys


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def fps_indices(pts, k, start):
    n = pts.shape[0]
    idx = np.empty(k, np.int64)
    dist2 = np.full(n, np.inf)
    chosen = np.zeros(n, dtype=bool)
    cur = int(start)
    for i in range(k):
        idx[i] = cur
        chosen[cur] = True
        diff = pts - pts[cur]
        d2 = (diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1]
              + diff[:, 2] * diff[:, 2])
        np.minimum(dist2, d2, out=dist2)
        masked = np.where(chosen, -np.inf, dist2)
        cur = int(np.argmax(masked))
    return idx


# ---------------------------------------------------------------------------
# triangle / box voxelization
# ---------------------------------------------------------------------------

def _axis_overlap(p0, p1, p2, r):
    return min(p0, p1, p2) <= r and max(p0, p1, p2) >= -r


def _tri_box_overlap(cx, cy, cz, hx, hy, hz, v, t):
    v0 = (v[t, 0, 0] - cx, v[t, 0, 1] - cy, v[t, 0, 2] - cz)
    v1 = (v[t, 1, 0] - cx, v[t, 1, 1] - cy, v[t, 1, 2] - cz)
    v2 = (v[t, 2, 0] - cx, v[t, 2, 1] - cy, v[t, 2, 2] - cz)
    if not _axis_overlap(v0[0], v1[0], v2[0], hx):
        return False
    if not _axis_overlap(v0[1], v1[1], v2[1], hy):
        return False
    if not _axis_overlap(v0[2], v1[2], v2[2], hz):
        return False
    e = [(v1[0] - v0[0], v1[1] - v0[1], v1[2] - v0[2]),
         (v2[0] - v1[0], v2[1] - v1[1], v2[2] - v1[2]),
         (v0[0] - v2[0], v0[1] - v2[1], v0[2] - v2[2])]
    for i in range(3):
        ex, ey, ez = e[i]
        for ax, ay, az in ((0.0, -ez, ey), (ez, 0.0, -ex), (-ey, ex, 0.0)):
            p0 = ax * v0[0] + ay * v0[1] + az * v0[2]
            p1 = ax * v1[0] + ay * v1[1] + az * v1[2]
            p2 = ax * v2[0] + ay * v2[1] + az * v2[2]
            r = hx * abs(ax) + hy * abs(ay) + hz * abs(az)
            if min(p0, p1, p2) > r or max(p0, p1, p2) < -r:
                return False
    e0, e1 = e[0], e[1]
    nx = e0[1] * e1[2] - e0[2] * e1[1]
    ny = e0[2] * e1[0] - e0[0] * e1[2]
    nz = e0[0] * e1[1] - e0[1] * e1[0]
    d = nx * v0[0] + ny * v0[1] + nz * v0[2]
    r = hx * abs(nx) + hy * abs(ny) + hz * abs(nz)
    return abs(d) <= r


def surface_voxel_mask(tv, res):
    occ = np.zeros((res, res, res), np.uint8)
    cell = 2.0 / res
    half = 0.5 * cell
    lo = tv.min(axis=1)
    hi = tv.max(axis=1)
    ilo = np.clip(np.floor((lo + 1.0) / cell).astype(np.int64), 0, res - 1)
    ihi = np.clip(np.floor((hi + 1.0) / cell).astype(np.int64), 0, res - 1)
    for t in range(tv.shape[0]):
        for iz in range(ilo[t, 2], ihi[t, 2] + 1):
            cz = -1.0 + (iz + 0.5) * cell
            for iy in range(ilo[t, 1], ihi[t, 1] + 1):
                cy = -1.0 + (iy + 0.5) * cell
                for ix in range(ilo[t, 0], ihi[t, 0] + 1):
                    if occ[iz, iy, ix]:
                        continue
                    cx = -1.0 + (ix + 0.5) * cell
                    if _tri_box_overlap(cx, cy, cz, half, half, half, tv, t):
                        occ[iz, iy, ix] = 1
    return occ
