"""Pure-numpy fallback for the compiled traversal kernel.

Same contract as ``_kernels.intersect_batch``: nearest hit per ray, ties
broken toward the smaller primitive id, +inf / -1 on miss. The traversal
keeps a frontier of (ray, node) pairs and expands it breadth-first, which
vectorizes well; results are identical to the compiled core because the
final nearest-hit reduction is visit-order independent.
"""

import numpy as np

_EPS_DET = 1e-14
_EPS_BARY = 1e-9


def bilinear_gather(flat, h, w, xs, ys, out):
    """Clamped bilinear fetches from a (h*w, c) image into out (m, c)."""
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = x.astype(np.intp)
    y0 = y.astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    b0 = y0 * w
    b1 = y1 * w
    top = flat.take(b0 + x0, axis=0) * (1.0 - fx) + flat.take(b0 + x1, axis=0) * fx
    bot = flat.take(b1 + x0, axis=0) * (1.0 - fx) + flat.take(b1 + x1, axis=0) * fx
    out[:] = top * (1.0 - fy) + bot * fy


def intersect_batch(bmin, bmax, left, right, start, count,
                    v0, e1, e2, perm,
                    orig, dirs, tmin, tmax,
                    out_t, out_pid, out_u, out_v):
    nrays = orig.shape[0]
    best_t = np.array(tmax, dtype=np.float64, copy=True)
    best_pid = np.full(nrays, -1, dtype=np.int32)
    best_u = np.zeros(nrays)
    best_v = np.zeros(nrays)

    if nrays:
        rays = np.arange(nrays, dtype=np.intp)
        nodes = np.zeros(nrays, dtype=np.intp)
        while rays.size:
            nb_min = bmin[nodes]
            nb_max = bmax[nodes]
            o = orig[rays]
            d = dirs[rays]
            near = np.array(tmin[rays], copy=True)
            # same pruning slack as the compiled core: keep equal-t hits on
            # leaf-box boundaries reachable for the prim-id tie-break
            far = best_t[rays] * (1.0 + 1e-9) + 1e-300
            ok = np.ones(rays.size, dtype=bool)
            for k in range(3):
                dk = d[:, k]
                zero = dk == 0.0
                with np.errstate(divide="ignore", invalid="ignore"):
                    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, dk))
                t0 = (nb_min[:, k] - o[:, k]) * inv
                t1 = (nb_max[:, k] - o[:, k]) * inv
                lo = np.minimum(t0, t1)
                hi = np.maximum(t0, t1)
                near = np.where(zero, near, np.maximum(near, lo))
                far = np.where(zero, far, np.minimum(far, hi))
                ok &= np.where(zero, (o[:, k] >= nb_min[:, k]) & (o[:, k] <= nb_max[:, k]), True)
            ok &= near <= far
            rays = rays[ok]
            nodes = nodes[ok]
            if not rays.size:
                break

            is_leaf = count[nodes] > 0
            leaf_rays = rays[is_leaf]
            leaf_nodes = nodes[is_leaf]
            if leaf_rays.size:
                counts = count[leaf_nodes].astype(np.intp)
                rep_rays = np.repeat(leaf_rays, counts)
                offs = np.concatenate([np.arange(c) for c in counts]) if counts.size else np.empty(0, np.intp)
                tri = np.repeat(start[leaf_nodes].astype(np.intp), counts) + offs
                _leaf_hits(v0, e1, e2, perm, orig, dirs, tmin,
                           rep_rays, tri, best_t, best_pid, best_u, best_v)

            inner_rays = rays[~is_leaf]
            inner_nodes = nodes[~is_leaf]
            rays = np.concatenate([inner_rays, inner_rays])
            nodes = np.concatenate([left[inner_nodes].astype(np.intp),
                                    right[inner_nodes].astype(np.intp)])

    miss = best_pid < 0
    out_t[:] = np.where(miss, np.inf, best_t)
    out_pid[:] = best_pid
    out_u[:] = np.where(miss, 0.0, best_u)
    out_v[:] = np.where(miss, 0.0, best_v)


def _leaf_hits(v0, e1, e2, perm, orig, dirs, tmin, rep_rays, tri,
               best_t, best_pid, best_u, best_v):
    """Moller-Trumbore over (ray, triangle) pairs, then per-ray reduction."""
    def dot(a, b):
        # explicit left-to-right sum: bitwise-identical to the compiled core
        return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]

    o = orig[rep_rays]
    d = dirs[rep_rays]
    tv0 = v0[tri]
    te1 = e1[tri]
    te2 = e2[tri]
    pvec = np.cross(d, te2)
    det = dot(te1, pvec)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_det = 1.0 / det
    tvec = o - tv0
    u = dot(tvec, pvec) * inv_det
    qvec = np.cross(tvec, te1)
    v = dot(d, qvec) * inv_det
    t = dot(te2, qvec) * inv_det
    good = (
        (np.abs(det) >= _EPS_DET)
        & (u >= -_EPS_BARY)
        & (u <= 1.0 + _EPS_BARY)
        & (v >= -_EPS_BARY)
        & (u + v <= 1.0 + _EPS_BARY)
        & (t >= tmin[rep_rays])
        & (
            (best_pid[rep_rays] < 0) & (t <= best_t[rep_rays])
            | (t < best_t[rep_rays])
            | ((t == best_t[rep_rays]) & (perm[tri] < best_pid[rep_rays]))
        )
    )
    if not np.any(good):
        return
    g_rays = rep_rays[good]
    g_t = t[good]
    g_pid = perm[tri[good]].astype(np.int64)
    g_u = u[good]
    g_v = v[good]
    # order by (ray, t, pid) and keep the first entry per ray
    order = np.lexsort((g_pid, g_t, g_rays))
    g_rays = g_rays[order]
    first = np.ones(g_rays.size, dtype=bool)
    first[1:] = g_rays[1:] != g_rays[:-1]
    g_rays = g_rays[first]
    g_t = g_t[order][first]
    g_pid = g_pid[order][first]
    g_u = g_u[order][first]
    g_v = g_v[order][first]
    take = (
        (best_pid[g_rays] < 0) & (g_t <= best_t[g_rays])
        | (g_t < best_t[g_rays])
        | ((g_t == best_t[g_rays]) & (g_pid < best_pid[g_rays]))
    )
    g_rays = g_rays[take]
    best_t[g_rays] = g_t[take]
    best_pid[g_rays] = g_pid[take]
    best_u[g_rays] = g_u[take]
    best_v[g_rays] = g_v[take]
