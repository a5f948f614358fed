# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled ray-intersection core.

One entry point: batched nearest-hit BVH traversal. Everything above this
(sampling, shading, filtering) is vectorized numpy and shared with the
pure-Python backend; only the per-ray traversal loop needs to be compiled.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs

DEF MAX_STACK = 64
DEF EPS_DET = 1e-14
DEF EPS_BARY = 1e-9


def bilinear_gather(double[:, ::1] flat, Py_ssize_t h, Py_ssize_t w,
                    double[::1] xs, double[::1] ys, double[:, ::1] out):
    """Clamped bilinear fetches from a (h*w, c) image into out (m, c)."""
    cdef Py_ssize_t m = xs.shape[0]
    cdef Py_ssize_t c = flat.shape[1]
    cdef Py_ssize_t i, k, x0, y0, x1, y1, b0, b1
    cdef double x, y, fx, fy, gx, gy, top, bot
    with nogil:
        for i in range(m):
            x = xs[i]
            if x < 0.0:
                x = 0.0
            elif x > w - 1.0:
                x = w - 1.0
            y = ys[i]
            if y < 0.0:
                y = 0.0
            elif y > h - 1.0:
                y = h - 1.0
            x0 = <Py_ssize_t>x
            y0 = <Py_ssize_t>y
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            y1 = y0 + 1
            if y1 > h - 1:
                y1 = h - 1
            fx = x - x0
            fy = y - y0
            gx = 1.0 - fx
            gy = 1.0 - fy
            b0 = y0 * w
            b1 = y1 * w
            for k in range(c):
                top = flat[b0 + x0, k] * gx + flat[b0 + x1, k] * fx
                bot = flat[b1 + x0, k] * gx + flat[b1 + x1, k] * fx
                out[i, k] = top * gy + bot * fy


cdef inline bint _slab(const double* bmin, const double* bmax,
                       const double* o, const double* d,
                       double tmin, double tmax) noexcept nogil:
    cdef double near = tmin
    cdef double far = tmax
    cdef double t0, t1, inv
    cdef int k
    for k in range(3):
        if d[k] == 0.0:
            if o[k] < bmin[k] or o[k] > bmax[k]:
                return False
        else:
            inv = 1.0 / d[k]
            t0 = (bmin[k] - o[k]) * inv
            t1 = (bmax[k] - o[k]) * inv
            if t0 > t1:
                t0, t1 = t1, t0
            if t0 > near:
                near = t0
            if t1 < far:
                far = t1
            if near > far:
                return False
    return True


def intersect_batch(double[:, ::1] bmin, double[:, ::1] bmax,
                    cnp.int32_t[::1] left, cnp.int32_t[::1] right,
                    cnp.int32_t[::1] start, cnp.int32_t[::1] count,
                    double[:, ::1] v0, double[:, ::1] e1, double[:, ::1] e2,
                    cnp.int32_t[::1] perm,
                    double[:, ::1] orig, double[:, ::1] dirs,
                    double[::1] tmin, double[::1] tmax,
                    double[::1] out_t, cnp.int32_t[::1] out_pid,
                    double[::1] out_u, double[::1] out_v):
    """Nearest hit per ray; ties broken toward the smaller primitive id.

    out_t = +inf and out_pid = -1 on miss. Runs without the GIL, so callers
    may fan chunks out over threads.
    """
    cdef Py_ssize_t nrays = orig.shape[0]
    cdef Py_ssize_t r
    cdef int stack[MAX_STACK]
    cdef int sp, node, j, pid
    cdef double o[3]
    cdef double d[3]
    cdef double best_t, t, u, v, det, inv_det
    cdef double pvx, pvy, pvz, tvx, tvy, tvz, qvx, qvy, qvz
    cdef int best_pid
    cdef double best_u, best_v
    cdef int lc, rc

    with nogil:
        for r in range(nrays):
            o[0] = orig[r, 0]; o[1] = orig[r, 1]; o[2] = orig[r, 2]
            d[0] = dirs[r, 0]; d[1] = dirs[r, 1]; d[2] = dirs[r, 2]
            best_t = tmax[r]
            best_pid = -1
            best_u = 0.0
            best_v = 0.0
            sp = 0
            stack[sp] = 0
            sp += 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                # prune with a tiny slack so equal-t hits on leaf-box
                # boundaries still get visited and tie-break by prim id
                if not _slab(&bmin[node, 0], &bmax[node, 0], o, d, tmin[r],
                             best_t + 1e-9 * best_t + 1e-300):
                    continue
                if count[node] > 0:
                    for j in range(start[node], start[node] + count[node]):
                        # Moller-Trumbore against pre-packed edges
                        pvx = d[1] * e2[j, 2] - d[2] * e2[j, 1]
                        pvy = d[2] * e2[j, 0] - d[0] * e2[j, 2]
                        pvz = d[0] * e2[j, 1] - d[1] * e2[j, 0]
                        det = e1[j, 0] * pvx + e1[j, 1] * pvy + e1[j, 2] * pvz
                        if fabs(det) < EPS_DET:
                            continue
                        inv_det = 1.0 / det
                        tvx = o[0] - v0[j, 0]
                        tvy = o[1] - v0[j, 1]
                        tvz = o[2] - v0[j, 2]
                        u = (tvx * pvx + tvy * pvy + tvz * pvz) * inv_det
                        if u < -EPS_BARY or u > 1.0 + EPS_BARY:
                            continue
                        qvx = tvy * e1[j, 2] - tvz * e1[j, 1]
                        qvy = tvz * e1[j, 0] - tvx * e1[j, 2]
                        qvz = tvx * e1[j, 1] - tvy * e1[j, 0]
                        v = (d[0] * qvx + d[1] * qvy + d[2] * qvz) * inv_det
                        if v < -EPS_BARY or u + v > 1.0 + EPS_BARY:
                            continue
                        t = (e2[j, 0] * qvx + e2[j, 1] * qvy + e2[j, 2] * qvz) * inv_det
                        if t < tmin[r] or t > best_t:
                            continue
                        pid = perm[j]
                        if best_pid < 0 or t < best_t or (t == best_t and pid < best_pid):
                            best_t = t
                            best_pid = pid
                            best_u = u
                            best_v = v
                else:
                    lc = left[node]
                    rc = right[node]
                    if sp + 2 <= MAX_STACK:
                        stack[sp] = rc
                        sp += 1
                        stack[sp] = lc
                        sp += 1
            if best_pid >= 0:
                out_t[r] = best_t
                out_pid[r] = best_pid
                out_u[r] = best_u
                out_v[r] = best_v
            else:
                out_t[r] = INFINITY
                out_pid[r] = -1
                out_u[r] = 0.0
                out_v[r] = 0.0
