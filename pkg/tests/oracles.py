"""Independent reference implementations used only to check the package.

Each oracle takes a different computational route from the code it checks:
point-to-triangle distance goes through plane/segment projections, mask
fill classifies every pixel centre by ray parity, volume comes from voxel
column parity counting, and the t CDF from adaptive Simpson quadrature.
"""
import math

import numpy as np


# ---------------------------------------------------------------------------
# Exact point-triangle distance via plane projection + segment distances


def _point_segment_distance(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def point_triangle_distance(p, tri):
    """Min distance from one point to one triangle (independent formulation)."""
    a, b, c = (np.asarray(x, dtype=np.float64) for x in tri)
    p = np.asarray(p, dtype=np.float64)
    n = np.cross(b - a, c - a)
    nn = float(n @ n)
    if nn > 0.0:
        # barycentric coordinates of the in-plane projection
        w = p - a
        u = b - a
        v = c - a
        d00, d01, d11 = float(u @ u), float(u @ v), float(v @ v)
        dw0, dw1 = float(w @ u), float(w @ v)
        denom = d00 * d11 - d01 * d01
        if denom != 0.0:
            s = (d11 * dw0 - d01 * dw1) / denom
            t = (d00 * dw1 - d01 * dw0) / denom
            if s >= 0.0 and t >= 0.0 and s + t <= 1.0:
                return abs(float(w @ n)) / math.sqrt(nn)
    return min(
        _point_segment_distance(p, a, b),
        _point_segment_distance(p, b, c),
        _point_segment_distance(p, c, a),
    )


def brute_nearest_distance(p, mesh):
    tri = mesh.triangle_corners()
    return min(point_triangle_distance(p, tri[i]) for i in range(len(tri)))


# ---------------------------------------------------------------------------
# Per-pixel even-odd fill


def even_odd_fill(polygons, window_2d, resolution):
    """Classify every pixel centre by counting edge crossings to its right."""
    (y_lo, z_lo), (y_hi, z_hi) = window_2d
    r = resolution
    dy = (y_hi - y_lo) / r
    dz = (z_hi - z_lo) / r
    grid = np.zeros((r, r), dtype=np.uint8)
    edges = []
    for loop in polygons:
        loop = np.asarray(loop, dtype=np.float64)
        nxt = np.roll(loop, -1, axis=0)
        edges.extend(zip(loop, nxt))
    for i in range(r):
        yc = y_lo + (i + 0.5) * dy
        for j in range(r):
            zc = z_lo + (j + 0.5) * dz
            inside = False
            for p1, p2 in edges:
                if (p1[0] <= yc) != (p2[0] <= yc):
                    z_cross = p1[1] + (yc - p1[0]) / (p2[0] - p1[0]) * (p2[1] - p1[1])
                    if zc < z_cross:
                        inside = not inside
            grid[i, j] = 1 if inside else 0
    return grid


# ---------------------------------------------------------------------------
# Voxel-column parity volume


def voxel_volume_cm3(mesh, h=0.25):
    """Volume by counting voxel centres inside the mesh, column by column.

    Casts one x-parallel ray per (y, z) voxel centre, collecting crossings
    from each triangle's (y, z) projection; grid origins carry irrational
    jitter so ray/edge ties do not occur in practice.
    """
    lo, hi = mesh.bounds()
    pad = 2.0 * h
    y0 = lo[1] - pad + h * (math.sqrt(2.0) - 1.0) * 0.25
    z0 = lo[2] - pad + h * (math.sqrt(3.0) - 1.0) * 0.25
    x0 = lo[0] - pad + h * (math.sqrt(5.0) - 1.0) * 0.25
    ny = int(np.ceil((hi[1] + pad - y0) / h))
    nz = int(np.ceil((hi[2] + pad - z0) / h))
    nx = int(np.ceil((hi[0] + pad - x0) / h))
    y_centres = y0 + (np.arange(ny) + 0.5) * h
    z_centres = z0 + (np.arange(nz) + 0.5) * h
    x_centres = x0 + (np.arange(nx) + 0.5) * h

    tri = mesh.triangle_corners()
    col_idx = []
    col_x = []
    for t in tri:
        ys = t[:, 1]
        zs = t[:, 2]
        iy0 = np.searchsorted(y_centres, ys.min())
        iy1 = np.searchsorted(y_centres, ys.max())
        iz0 = np.searchsorted(z_centres, zs.min())
        iz1 = np.searchsorted(z_centres, zs.max())
        if iy0 == iy1 or iz0 == iz1:
            continue
        yy, zz = np.meshgrid(y_centres[iy0:iy1], z_centres[iz0:iz1], indexing="ij")
        # 2D barycentric test in the (y, z) projection
        d = (zs[1] - zs[2]) * (ys[0] - ys[2]) + (ys[2] - ys[1]) * (zs[0] - zs[2])
        if d == 0.0:
            continue  # projection degenerate: ray can only graze, measure zero
        l1 = ((zs[1] - zs[2]) * (yy - ys[2]) + (ys[2] - ys[1]) * (zz - zs[2])) / d
        l2 = ((zs[2] - zs[0]) * (yy - ys[2]) + (ys[0] - ys[2]) * (zz - zs[2])) / d
        l3 = 1.0 - l1 - l2
        inside = (l1 > 0.0) & (l2 > 0.0) & (l3 > 0.0)
        if not inside.any():
            continue
        x_cross = l1 * t[0, 0] + l2 * t[1, 0] + l3 * t[2, 0]
        iy, iz = np.nonzero(inside)
        col_idx.append((iy + iy0) * nz + (iz + iz0))
        col_x.append(x_cross[inside])
    if not col_idx:
        return 0.0
    cols = np.concatenate(col_idx)
    xs = np.concatenate(col_x)
    order = np.lexsort((xs, cols))
    cols = cols[order]
    xs = xs[order]
    count = 0
    start = 0
    while start < len(cols):
        end = start
        while end < len(cols) and cols[end] == cols[start]:
            end += 1
        crossings = xs[start:end]
        assert (end - start) % 2 == 0, "odd crossing parity; jittered grid should prevent ties"
        for a, b in zip(crossings[0::2], crossings[1::2]):
            count += np.searchsorted(x_centres, b) - np.searchsorted(x_centres, a)
        start = end
    return count * h**3 / 1000.0


# ---------------------------------------------------------------------------
# Student-t CDF by adaptive Simpson quadrature


def _t_pdf(x, df):
    ln = (
        math.lgamma((df + 1) / 2.0)
        - math.lgamma(df / 2.0)
        - 0.5 * math.log(df * math.pi)
        - (df + 1) / 2.0 * math.log1p(x * x / df)
    )
    return math.exp(ln)


def _adaptive_simpson(f, a, b, tol, whole, fa, fm, fb, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return _adaptive_simpson(f, a, m, tol / 2.0, left, fa, flm, fm, depth - 1) + _adaptive_simpson(
        f, m, b, tol / 2.0, right, fm, frm, fb, depth - 1
    )


def integrate(f, a, b, tol=1e-13):
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _adaptive_simpson(f, a, b, tol, whole, fa, fm, fb, depth=60)


def t_cdf_by_quadrature(t, df):
    """CDF as 0.5 + integral of the density from 0 to t."""
    if t == 0.0:
        return 0.5
    hi = abs(t)
    total = 0.0
    # integrate in unit-ish chunks so the adaptive rule resolves the peak
    edges = np.linspace(0.0, hi, max(2, int(hi) + 2))
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate(lambda x: _t_pdf(x, df), a, b)
    return 0.5 + total if t > 0 else 0.5 - total
