"""Pure-numpy implementations of the hot non-FFT kernels.

Used when the compiled extension is unavailable (or when
STRIAFLOW_KERNELS=python). Same contracts as _core.pyx.
"""

from __future__ import annotations

import numpy as np


def trig_eval(coeffs, fx, fy, scale, xs, ys):
    """Evaluate a trigonometric series at arbitrary points.

    out[m] = Re sum_{a,b} coeffs[a,b] exp(i*scale*(fx[a]*xs[m] + fy[b]*ys[m]))

    coeffs: (na, nb) complex; fx: (na,); fy: (nb,); xs, ys: (m,).
    Exact for band-limited fields; cost O(m * na * nb) via two matmuls.
    """
    ax = np.exp(1j * scale * np.outer(xs, fx))
    by = np.exp(1j * scale * np.outer(ys, fy))
    return np.einsum("ma,mb,ab->m", ax, by, coeffs, optimize=True).real


def holder_pair_max(values, interior, offsets, spacing, eps):
    """Max of |f(x)-f(y)| / |x-y|^eps over interior point pairs.

    Pairs are (p, p+offset) for each integer offset in ``offsets`` with both
    endpoints flagged interior. Offsets wrap periodically; callers guarantee
    the interior set stays away from the box boundary so wrapped pairs never
    join two interior points across the box.
    """
    best = 0.0
    vals = np.asarray(values)
    mask = np.asarray(interior, dtype=bool)
    for di, dj in offsets:
        dist = spacing * float(np.hypot(di, dj))
        if dist == 0.0:
            continue
        shifted = np.roll(vals, (-int(di), -int(dj)), axis=(0, 1))
        both = mask & np.roll(mask, (-int(di), -int(dj)), axis=(0, 1))
        if not both.any():
            continue
        diff = np.max(np.abs(vals[both] - shifted[both]))
        q = diff / dist**eps
        if q > best:
            best = q
    return float(best)


def polyline_interior_distance(px, py, qx, qy):
    """Winding number and min distance from query points to a closed polyline.

    px, py: (s,) polygon vertices (closed implicitly: last connects to first).
    qx, qy: (m,) query points.
    Returns (winding (m,) int64, distance (m,) float64).
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    qx = np.asarray(qx, dtype=np.float64)
    qy = np.asarray(qy, dtype=np.float64)
    ax, ay = px, py
    bx, by = np.roll(px, -1), np.roll(py, -1)

    ex = (bx - ax)[None, :]
    ey = (by - ay)[None, :]
    wx = qx[:, None] - ax[None, :]
    wy = qy[:, None] - ay[None, :]
    seg_len_sq = ex * ex + ey * ey
    t = np.clip((wx * ex + wy * ey) / np.where(seg_len_sq > 0, seg_len_sq, 1.0), 0.0, 1.0)
    dx = wx - t * ex
    dy = wy - t * ey
    dist = np.sqrt(np.min(dx * dx + dy * dy, axis=1))

    # Crossing-count winding parity via upward/downward edge crossings.
    cond_up = (ay[None, :] <= qy[:, None]) & (by[None, :] > qy[:, None])
    cond_dn = (ay[None, :] > qy[:, None]) & (by[None, :] <= qy[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax[None, :] + (qy[:, None] - ay[None, :]) / np.where(ey != 0, ey, 1.0) * ex
    left = qx[:, None] < xint
    winding = (np.sum(cond_up & left, axis=1) - np.sum(cond_dn & left, axis=1)).astype(np.int64)
    return winding, dist
