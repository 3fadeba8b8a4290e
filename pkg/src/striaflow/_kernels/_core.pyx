# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: off-grid trig summation, Holder pair scan,
and point-to-polyline distance/winding. Mirrors fallback.py contracts."""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, hypot, pow as c_pow, sin, sqrt

cnp.import_array()


def trig_eval(const cnp.complex128_t[:, :] coeffs,
              const double[:] fx, const double[:] fy,
              double scale,
              const double[:] xs, const double[:] ys):
    cdef Py_ssize_t m = xs.shape[0]
    cdef Py_ssize_t na = fx.shape[0]
    cdef Py_ssize_t nb = fy.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t p, a, b, ai, bi, nr, nc
    cdef double acc, ang
    cdef double cr, ci, pr, pi, rr, ri

    # De-aliased inputs zero most rows and columns; scan the support once
    # and only visit modes that can contribute.
    row_idx_arr = np.empty(na, dtype=np.intp)
    col_idx_arr = np.empty(nb, dtype=np.intp)
    cdef Py_ssize_t[:] row_idx = row_idx_arr
    cdef Py_ssize_t[:] col_idx = col_idx_arr
    col_used_arr = np.zeros(nb, dtype=np.uint8)
    cdef cnp.uint8_t[:] col_used = col_used_arr
    cdef bint row_used
    nr = 0
    for a in range(na):
        row_used = 0
        for b in range(nb):
            if coeffs[a, b].real != 0.0 or coeffs[a, b].imag != 0.0:
                col_used[b] = 1
                row_used = 1
        if row_used:
            row_idx[nr] = a
            nr += 1
    nc = 0
    for b in range(nb):
        if col_used[b]:
            col_idx[nc] = b
            nc += 1

    # Column phases are cached once per point, row phases once per row.
    phases_arr = np.empty(nb, dtype=np.complex128)
    cdef cnp.complex128_t[:] col_phase = phases_arr
    for p in range(m):
        for bi in range(nc):
            b = col_idx[bi]
            ang = scale * fy[b] * ys[p]
            col_phase[b] = cos(ang) + 1j * sin(ang)
        acc = 0.0
        for ai in range(nr):
            a = row_idx[ai]
            # Accumulate row sum sum_b c[a,b]*col_phase[b].
            rr = 0.0
            ri = 0.0
            for bi in range(nc):
                b = col_idx[bi]
                cr = coeffs[a, b].real
                ci = coeffs[a, b].imag
                pr = col_phase[b].real
                pi = col_phase[b].imag
                rr += cr * pr - ci * pi
                ri += cr * pi + ci * pr
            ang = scale * fx[a] * xs[p]
            acc += rr * cos(ang) - ri * sin(ang)
        out[p] = acc
    return out_arr


def holder_pair_max(const double[:, :] values,
                    const cnp.uint8_t[:, :] interior,
                    const long[:, :] offsets,
                    double spacing, double eps):
    cdef Py_ssize_t n0 = values.shape[0]
    cdef Py_ssize_t n1 = values.shape[1]
    cdef Py_ssize_t no = offsets.shape[0]
    cdef Py_ssize_t i, j, k, i2, j2
    cdef double best = 0.0, dist, q
    for k in range(no):
        dist = spacing * hypot(<double> offsets[k, 0], <double> offsets[k, 1])
        if dist == 0.0:
            continue
        dist = c_pow(dist, eps)
        for i in range(n0):
            i2 = (i + offsets[k, 0]) % n0
            if i2 < 0:
                i2 += n0
            for j in range(n1):
                if not interior[i, j]:
                    continue
                j2 = (j + offsets[k, 1]) % n1
                if j2 < 0:
                    j2 += n1
                if not interior[i2, j2]:
                    continue
                q = fabs(values[i, j] - values[i2, j2]) / dist
                if q > best:
                    best = q
    return best


def polyline_interior_distance(const double[:] px, const double[:] py,
                               const double[:] qx, const double[:] qy):
    cdef Py_ssize_t s = px.shape[0]
    cdef Py_ssize_t m = qx.shape[0]
    wind_arr = np.empty(m, dtype=np.int64)
    dist_arr = np.empty(m, dtype=np.float64)
    cdef long[:] wind = wind_arr
    cdef double[:] dist = dist_arr
    cdef Py_ssize_t p, e
    cdef double ax, ay, bx, by, ex_, ey_, wx_, wy_, t, dx_, dy_, d2, best, xint
    cdef long w
    for p in range(m):
        best = 1e300
        w = 0
        for e in range(s):
            ax = px[e]
            ay = py[e]
            bx = px[(e + 1) % s]
            by = py[(e + 1) % s]
            ex_ = bx - ax
            ey_ = by - ay
            wx_ = qx[p] - ax
            wy_ = qy[p] - ay
            d2 = ex_ * ex_ + ey_ * ey_
            t = 0.0
            if d2 > 0.0:
                t = (wx_ * ex_ + wy_ * ey_) / d2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            dx_ = wx_ - t * ex_
            dy_ = wy_ - t * ey_
            d2 = dx_ * dx_ + dy_ * dy_
            if d2 < best:
                best = d2
            if (ay <= qy[p]) and (by > qy[p]):
                xint = ax + (qy[p] - ay) / (ey_ if ey_ != 0.0 else 1.0) * ex_
                if qx[p] < xint:
                    w += 1
            elif (ay > qy[p]) and (by <= qy[p]):
                xint = ax + (qy[p] - ay) / (ey_ if ey_ != 0.0 else 1.0) * ex_
                if qx[p] < xint:
                    w -= 1
        wind[p] = w
        dist[p] = sqrt(best)
    return wind_arr, dist_arr
