"""JIT-compiled geometry kernels.

All hot inner loops of the toolkit live here: exact point-triangle
closest-point queries over a BVH, watertight ray casting for visibility
labeling, grid flood fill, marching-cubes cell passes, farthest-point
sampling and triangle/box voxelization.

Every function has a matching pure-numpy twin in ``numpy_backend`` with
identical numerics; ``geoforge.kernels`` picks one at import time.
"""

import os

import numpy as np

# the bundled TBB probe warns on older TBB installs; omp is always fine here
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from numba import njit, prange

BACKEND_NAME = "numba"


# ---------------------------------------------------------------------------
# scalar geometry helpers
# ---------------------------------------------------------------------------

@njit(cache=True)
def _box_dist2(px, py, pz, bmin, bmax, node):
    d2 = 0.0
    v = bmin[node, 0] - px
    if v > 0.0:
        d2 += v * v
    v = px - bmax[node, 0]
    if v > 0.0:
        d2 += v * v
    v = bmin[node, 1] - py
    if v > 0.0:
        d2 += v * v
    v = py - bmax[node, 1]
    if v > 0.0:
        d2 += v * v
    v = bmin[node, 2] - pz
    if v > 0.0:
        d2 += v * v
    v = pz - bmax[node, 2]
    if v > 0.0:
        d2 += v * v
    return d2


@njit(cache=True)
def _tri_closest(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Closest point on triangle abc to p (Voronoi-region walk)."""
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = cx - ax
    acy = cy - ay
    acz = cz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az
    bpx = px - bx
    bpy = py - by
    bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz
    cpx = px - cx
    cpy = py - cy
    cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)
    s = va + vb + vc
    if s <= 0.0:  # degenerate face; fall back to nearest vertex
        return ax, ay, az
    denom = 1.0 / s
    v = vb * denom
    w = vc * denom
    return ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w


@njit(cache=True)
def _closest_traverse(px, py, pz, bmin, bmax, left, right, leaf, tv, best2):
    """Nearest triangle to p; prunes with an upper bound ``best2``.

    The seed bound must be strictly above the true minimum squared
    distance, otherwise the winning triangle is not identified (returned
    distance is still exact).
    """
    stack = np.empty(128, np.int64)
    stack[0] = 0
    sp = 1
    bt = np.int64(-1)
    fx = 0.0
    fy = 0.0
    fz = 0.0
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _box_dist2(px, py, pz, bmin, bmax, node) >= best2:
            continue
        if leaf[node] != 0:
            start = left[node]
            stop = start + right[node]
            for t in range(start, stop):
                qx, qy, qz = _tri_closest(
                    px, py, pz,
                    tv[t, 0, 0], tv[t, 0, 1], tv[t, 0, 2],
                    tv[t, 1, 0], tv[t, 1, 1], tv[t, 1, 2],
                    tv[t, 2, 0], tv[t, 2, 1], tv[t, 2, 2])
                dx = px - qx
                dy = py - qy
                dz = pz - qz
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < best2:
                    best2 = d2
                    bt = t
                    fx = qx
                    fy = qy
                    fz = qz
        else:
            l = left[node]
            r = right[node]
            dl = _box_dist2(px, py, pz, bmin, bmax, l)
            dr = _box_dist2(px, py, pz, bmin, bmax, r)
            if dl <= dr:  # push farther child first, nearer popped first
                if dr < best2:
                    stack[sp] = r
                    sp += 1
                if dl < best2:
                    stack[sp] = l
                    sp += 1
            else:
                if dl < best2:
                    stack[sp] = l
                    sp += 1
                if dr < best2:
                    stack[sp] = r
                    sp += 1
    return best2, bt, fx, fy, fz


@njit(cache=True, parallel=True)
def closest_point_batch(points, bmin, bmax, left, right, leaf, tv):
    n = points.shape[0]
    dist = np.empty(n)
    tri = np.empty(n, np.int64)
    foot = np.empty((n, 3))
    for i in prange(n):
        d2, t, fx, fy, fz = _closest_traverse(
            points[i, 0], points[i, 1], points[i, 2],
            bmin, bmax, left, right, leaf, tv, np.inf)
        dist[i] = np.sqrt(d2)
        tri[i] = t
        foot[i, 0] = fx
        foot[i, 1] = fy
        foot[i, 2] = fz
    return dist, tri, foot


@njit(cache=True, parallel=True)
def udf_grid(res, bmin, bmax, left, right, leaf, tv):
    """Exact unsigned distance at every corner of an R^3 grid on [-1,1]^3.

    Row-wise warm start: along x the distance is 1-Lipschitz, so the
    previous value + h (+ slack) is a valid strict upper bound and prunes
    most of the tree without changing results.
    """
    vals = np.empty((res, res, res))
    h = 2.0 / (res - 1)
    for iz in prange(res):
        z = -1.0 + iz * h
        for iy in range(res):
            y = -1.0 + iy * h
            prev = -1.0
            for ix in range(res):
                x = -1.0 + ix * h
                if prev < 0.0:
                    seed = np.inf
                else:
                    s = prev + h + 1e-12
                    seed = s * s
                d2, _, _, _, _ = _closest_traverse(
                    x, y, z, bmin, bmax, left, right, leaf, tv, seed)
                d = np.sqrt(d2)
                vals[iz, iy, ix] = d
                prev = d
    return vals


# ---------------------------------------------------------------------------
# ray casting
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ray_box_hit(o, d, t_min, bmin, bmax, node):
    lo = t_min
    hi = np.inf
    for axis in range(3):
        da = d[axis]
        oa = o[axis]
        mn = bmin[node, axis]
        mx = bmax[node, axis]
        if da != 0.0:
            inv = 1.0 / da
            t1 = (mn - oa) * inv
            t2 = (mx - oa) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > lo:
                lo = t1
            if t2 < hi:
                hi = t2
            if lo > hi:
                return False
        elif oa < mn or oa > mx:
            return False
    return True


@njit(cache=True)
def _ray_tri_t(o, kx, ky, kz, sx, sy, sz, tv, t):
    """Hit parameter of a shear-transformed ray against triangle ``t``.

    Returns -inf on a miss.  Edge-on hits (a barycentric factor exactly
    zero) count as hits so rays cannot slip between adjacent triangles.
    """
    axx = tv[t, 0, kx] - o[kx]
    axy = tv[t, 0, ky] - o[ky]
    axz = tv[t, 0, kz] - o[kz]
    bxx = tv[t, 1, kx] - o[kx]
    bxy = tv[t, 1, ky] - o[ky]
    bxz = tv[t, 1, kz] - o[kz]
    cxx = tv[t, 2, kx] - o[kx]
    cxy = tv[t, 2, ky] - o[ky]
    cxz = tv[t, 2, kz] - o[kz]
    ax_ = axx - sx * axz
    ay_ = axy - sy * axz
    bx_ = bxx - sx * bxz
    by_ = bxy - sy * bxz
    cx_ = cxx - sx * cxz
    cy_ = cxy - sy * cxz
    u = cx_ * by_ - cy_ * bx_
    v = ax_ * cy_ - ay_ * cx_
    w = bx_ * ay_ - by_ * ax_
    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return -np.inf
    det = u + v + w
    if det == 0.0:
        return -np.inf
    tpar = (u * (sz * axz) + v * (sz * bxz) + w * (sz * cxz)) / det
    return tpar


@njit(cache=True)
def _ray_setup(d):
    adx = abs(d[0])
    ady = abs(d[1])
    adz = abs(d[2])
    if adx >= ady and adx >= adz:
        kz = 0
    elif ady >= adz:
        kz = 1
    else:
        kz = 2
    kx = kz + 1
    if kx == 3:
        kx = 0
    ky = kx + 1
    if ky == 3:
        ky = 0
    if d[kz] < 0.0:
        kx, ky = ky, kx
    sx = d[kx] / d[kz]
    sy = d[ky] / d[kz]
    sz = 1.0 / d[kz]
    return kx, ky, kz, sx, sy, sz


@njit(cache=True)
def _any_hit(o, d, kx, ky, kz, sx, sy, sz, t_min,
             bmin, bmax, left, right, leaf, tv):
    """First triangle found with hit parameter > t_min, or -1."""
    stack = np.empty(128, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if not _ray_box_hit(o, d, t_min, bmin, bmax, node):
            continue
        if leaf[node] != 0:
            start = left[node]
            stop = start + right[node]
            for t in range(start, stop):
                tpar = _ray_tri_t(o, kx, ky, kz, sx, sy, sz, tv, t)
                if tpar > t_min:
                    return t
        else:
            stack[sp] = left[node]
            sp += 1
            stack[sp] = right[node]
            sp += 1
    return np.int64(-1)


@njit(cache=True)
def ray_hit_triangle(o, d, t_min, bmin, bmax, left, right, leaf, tv):
    kx, ky, kz, sx, sy, sz = _ray_setup(d)
    return _any_hit(o, d, kx, ky, kz, sx, sy, sz, t_min,
                    bmin, bmax, left, right, leaf, tv)


@njit(cache=True)
def _escape_count(o, dirs, kxs, kys, kzs, sxs, sys, szs, t_min, thresh,
                  cache, bmin, bmax, left, right, leaf, tv):
    """Escaping probes from one origin, with early exit both ways.

    ``cache`` holds the last blocking triangle per direction; a cached
    hit proves blockage without a traversal and never alters the result.
    Returns the escape count, clamped once the inside/outside decision
    is forced.
    """
    ndir = dirs.shape[0]
    esc = 0
    for k in range(ndir):
        blocked = False
        ct = cache[k]
        if ct >= 0:
            tpar = _ray_tri_t(o, kxs[k], kys[k], kzs[k],
                              sxs[k], sys[k], szs[k], tv, ct)
            if tpar > t_min:
                blocked = True
        if not blocked:
            hit = _any_hit(o, dirs[k], kxs[k], kys[k], kzs[k],
                           sxs[k], sys[k], szs[k], t_min,
                           bmin, bmax, left, right, leaf, tv)
            if hit >= 0:
                blocked = True
                cache[k] = hit
        if blocked:
            if esc + (ndir - 1 - k) <= thresh:
                break  # cannot exceed threshold anymore: inside
        else:
            esc += 1
            if esc > thresh:
                break  # outside decided
    return esc


@njit(cache=True, parallel=True)
def visibility_labels(res, dirs, t_min, tau,
                      bmin, bmax, left, right, leaf, tv):
    """Per-grid-point labels: 1 where every probe ray is blocked enough.

    A point is outside (0) iff the fraction of escaping probe directions
    exceeds tau.
    """
    ndir = dirs.shape[0]
    thresh = tau * ndir
    labels = np.empty((res, res, res), np.uint8)
    h = 2.0 / (res - 1)
    kxs = np.empty(ndir, np.int64)
    kys = np.empty(ndir, np.int64)
    kzs = np.empty(ndir, np.int64)
    sxs = np.empty(ndir)
    sys = np.empty(ndir)
    szs = np.empty(ndir)
    for k in range(ndir):
        kx, ky, kz, sx, sy, sz = _ray_setup(dirs[k])
        kxs[k] = kx
        kys[k] = ky
        kzs[k] = kz
        sxs[k] = sx
        sys[k] = sy
        szs[k] = sz
    for iz in prange(res):
        cache = np.full(ndir, -1, np.int64)
        o = np.empty(3)
        o[2] = -1.0 + iz * h
        for iy in range(res):
            o[1] = -1.0 + iy * h
            for ix in range(res):
                o[0] = -1.0 + ix * h
                esc = _escape_count(o, dirs, kxs, kys, kzs, sxs, sys, szs,
                                    t_min, thresh, cache,
                                    bmin, bmax, left, right, leaf, tv)
                labels[iz, iy, ix] = 0 if esc > thresh else 1
    return labels


@njit(cache=True, parallel=True)
def visibility_labels_points(points, dirs, t_min, tau,
                             bmin, bmax, left, right, leaf, tv):
    ndir = dirs.shape[0]
    thresh = tau * ndir
    n = points.shape[0]
    labels = np.empty(n, np.uint8)
    kxs = np.empty(ndir, np.int64)
    kys = np.empty(ndir, np.int64)
    kzs = np.empty(ndir, np.int64)
    sxs = np.empty(ndir)
    sys = np.empty(ndir)
    szs = np.empty(ndir)
    for k in range(ndir):
        kx, ky, kz, sx, sy, sz = _ray_setup(dirs[k])
        kxs[k] = kx
        kys[k] = ky
        kzs[k] = kz
        sxs[k] = sx
        sys[k] = sy
        szs[k] = sz
    for i in prange(n):
        cache = np.full(ndir, -1, np.int64)
        o = points[i].copy()
        esc = _escape_count(o, dirs, kxs, kys, kzs, sxs, sys, szs,
                            t_min, thresh, cache,
                            bmin, bmax, left, right, leaf, tv)
        labels[i] = 0 if esc > thresh else 1
    return labels


# ---------------------------------------------------------------------------
# flood fill
# ---------------------------------------------------------------------------

@njit(cache=True)
def flood_reached(open_mask):
    """6-connected reachability from the grid boundary through open points."""
    res = open_mask.shape[0]
    reached = np.zeros((res, res, res), np.uint8)
    queue = np.empty(res * res * res, np.int64)
    qn = 0
    last = res - 1
    for iz in range(res):
        for iy in range(res):
            for ix in range(res):
                if (iz == 0 or iz == last or iy == 0 or iy == last
                        or ix == 0 or ix == last):
                    if open_mask[iz, iy, ix] != 0 and reached[iz, iy, ix] == 0:
                        reached[iz, iy, ix] = 1
                        queue[qn] = (iz * res + iy) * res + ix
                        qn += 1
    head = 0
    while head < qn:
        idx = queue[head]
        head += 1
        ix = idx % res
        iy = (idx // res) % res
        iz = idx // (res * res)
        for step in range(6):
            jx = ix
            jy = iy
            jz = iz
            if step == 0:
                jx = ix - 1
            elif step == 1:
                jx = ix + 1
            elif step == 2:
                jy = iy - 1
            elif step == 3:
                jy = iy + 1
            elif step == 4:
                jz = iz - 1
            else:
                jz = iz + 1
            if jx < 0 or jx > last or jy < 0 or jy > last or jz < 0 or jz > last:
                continue
            if open_mask[jz, jy, jx] != 0 and reached[jz, jy, jx] == 0:
                reached[jz, jy, jx] = 1
                queue[qn] = (jz * res + jy) * res + jx
                qn += 1
    return reached


# ---------------------------------------------------------------------------
# marching cubes passes
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def mc_classify(values, iso, rowlen):
    res = values.shape[0]
    ncell = res - 1
    cubeidx = np.empty((ncell, ncell, ncell), np.uint8)
    counts = np.empty((ncell, ncell, ncell), np.uint8)
    for iz in prange(ncell):
        for iy in range(ncell):
            for ix in range(ncell):
                ci = 0
                if values[iz, iy, ix] < iso:
                    ci |= 1
                if values[iz, iy, ix + 1] < iso:
                    ci |= 2
                if values[iz, iy + 1, ix + 1] < iso:
                    ci |= 4
                if values[iz, iy + 1, ix] < iso:
                    ci |= 8
                if values[iz + 1, iy, ix] < iso:
                    ci |= 16
                if values[iz + 1, iy, ix + 1] < iso:
                    ci |= 32
                if values[iz + 1, iy + 1, ix + 1] < iso:
                    ci |= 64
                if values[iz + 1, iy + 1, ix] < iso:
                    ci |= 128
                cubeidx[iz, iy, ix] = ci
                counts[iz, iy, ix] = rowlen[ci]
    return cubeidx, counts


@njit(cache=True, parallel=True)
def mc_emit(cubeidx, counts, offsets, tri_table,
            edge_axis, edge_dx, edge_dy, edge_dz, res):
    """Emit one global edge key per triangle corner, welding implied."""
    ncell = res - 1
    total = offsets[offsets.shape[0] - 1]
    keys = np.empty(total * 3, np.int64)
    r2 = res * res
    for iz in prange(ncell):
        for iy in range(ncell):
            for ix in range(ncell):
                n = counts[iz, iy, ix]
                if n == 0:
                    continue
                cell = (iz * ncell + iy) * ncell + ix
                off = offsets[cell]
                ci = cubeidx[iz, iy, ix]
                for t in range(n):
                    for j in range(3):
                        e = tri_table[ci, 3 * t + j]
                        px = ix + edge_dx[e]
                        py = iy + edge_dy[e]
                        pz = iz + edge_dz[e]
                        keys[(off + t) * 3 + j] = (
                            edge_axis[e] * res * r2 + (pz * res + py) * res + px)
    return keys


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

@njit(cache=True)
def fps_indices(pts, k, start):
    """Greedy farthest-point subset; ties go to the lower index."""
    n = pts.shape[0]
    idx = np.empty(k, np.int64)
    dist2 = np.full(n, np.inf)
    chosen = np.zeros(n, np.uint8)
    cur = start
    for i in range(k):
        idx[i] = cur
        chosen[cur] = 1
        cx = pts[cur, 0]
        cy = pts[cur, 1]
        cz = pts[cur, 2]
        best = -1.0
        nxt = -1
        for j in range(n):
            dx = pts[j, 0] - cx
            dy = pts[j, 1] - cy
            dz = pts[j, 2] - cz
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < dist2[j]:
                dist2[j] = d2
            if chosen[j] == 0 and dist2[j] > best:
                best = dist2[j]
                nxt = j
        cur = nxt
        if cur < 0:  # k == n and everything selected
            cur = 0
    return idx


# ---------------------------------------------------------------------------
# triangle / box voxelization
# ---------------------------------------------------------------------------

@njit(cache=True)
def _axis_overlap(p0, p1, p2, r):
    mn = min(p0, min(p1, p2))
    mx = max(p0, max(p1, p2))
    return mn <= r and mx >= -r


@njit(cache=True)
def _tri_box_overlap(cx, cy, cz, hx, hy, hz, v, t):
    """Separating-axis triangle/AABB test, inclusive at touches."""
    v0x = v[t, 0, 0] - cx
    v0y = v[t, 0, 1] - cy
    v0z = v[t, 0, 2] - cz
    v1x = v[t, 1, 0] - cx
    v1y = v[t, 1, 1] - cy
    v1z = v[t, 1, 2] - cz
    v2x = v[t, 2, 0] - cx
    v2y = v[t, 2, 1] - cy
    v2z = v[t, 2, 2] - cz
    if not _axis_overlap(v0x, v1x, v2x, hx):
        return False
    if not _axis_overlap(v0y, v1y, v2y, hy):
        return False
    if not _axis_overlap(v0z, v1z, v2z, hz):
        return False
    e0x = v1x - v0x
    e0y = v1y - v0y
    e0z = v1z - v0z
    e1x = v2x - v1x
    e1y = v2y - v1y
    e1z = v2z - v1z
    e2x = v0x - v2x
    e2y = v0y - v2y
    e2z = v0z - v2z
    # 9 cross-product axes, unrolled
    for pick in range(9):
        if pick == 0:
            ax, ay, az = 0.0, -e0z, e0y
        elif pick == 1:
            ax, ay, az = 0.0, -e1z, e1y
        elif pick == 2:
            ax, ay, az = 0.0, -e2z, e2y
        elif pick == 3:
            ax, ay, az = e0z, 0.0, -e0x
        elif pick == 4:
            ax, ay, az = e1z, 0.0, -e1x
        elif pick == 5:
            ax, ay, az = e2z, 0.0, -e2x
        elif pick == 6:
            ax, ay, az = -e0y, e0x, 0.0
        elif pick == 7:
            ax, ay, az = -e1y, e1x, 0.0
        else:
            ax, ay, az = -e2y, e2x, 0.0
        p0 = ax * v0x + ay * v0y + az * v0z
        p1 = ax * v1x + ay * v1y + az * v1z
        p2 = ax * v2x + ay * v2y + az * v2z
        r = hx * abs(ax) + hy * abs(ay) + hz * abs(az)
        mn = min(p0, min(p1, p2))
        mx = max(p0, max(p1, p2))
        if mn > r or mx < -r:
            return False
    # triangle plane
    nx = e0y * e1z - e0z * e1y
    ny = e0z * e1x - e0x * e1z
    nz = e0x * e1y - e0y * e1x
    d = nx * v0x + ny * v0y + nz * v0z
    r = hx * abs(nx) + hy * abs(ny) + hz * abs(nz)
    return abs(d) <= r


@njit(cache=True)
def surface_voxel_mask(tv, res):
    """Cells of a res^3 partition of [-1,1]^3 touched by any triangle."""
    occ = np.zeros((res, res, res), np.uint8)
    cell = 2.0 / res
    half = 0.5 * cell
    ntri = tv.shape[0]
    for t in range(ntri):
        mnx = min(tv[t, 0, 0], min(tv[t, 1, 0], tv[t, 2, 0]))
        mxx = max(tv[t, 0, 0], max(tv[t, 1, 0], tv[t, 2, 0]))
        mny = min(tv[t, 0, 1], min(tv[t, 1, 1], tv[t, 2, 1]))
        mxy = max(tv[t, 0, 1], max(tv[t, 1, 1], tv[t, 2, 1]))
        mnz = min(tv[t, 0, 2], min(tv[t, 1, 2], tv[t, 2, 2]))
        mxz = max(tv[t, 0, 2], max(tv[t, 1, 2], tv[t, 2, 2]))
        ix0 = max(0, min(res - 1, int(np.floor((mnx + 1.0) / cell))))
        ix1 = max(0, min(res - 1, int(np.floor((mxx + 1.0) / cell))))
        iy0 = max(0, min(res - 1, int(np.floor((mny + 1.0) / cell))))
        iy1 = max(0, min(res - 1, int(np.floor((mxy + 1.0) / cell))))
        iz0 = max(0, min(res - 1, int(np.floor((mnz + 1.0) / cell))))
        iz1 = max(0, min(res - 1, int(np.floor((mxz + 1.0) / cell))))
        for iz in range(iz0, iz1 + 1):
            cz = -1.0 + (iz + 0.5) * cell
            for iy in range(iy0, iy1 + 1):
                cy = -1.0 + (iy + 0.5) * cell
                for ix in range(ix0, ix1 + 1):
                    if occ[iz, iy, ix] != 0:
                        continue
                    cx = -1.0 + (ix + 0.5) * cell
                    if _tri_box_overlap(cx, cy, cz, half, half, half, tv, t):
                        occ[iz, iy, ix] = 1
    return occ
