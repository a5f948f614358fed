"""BVH construction and ray queries.

Median split over the longest centroid axis, leaves hold at most 4
primitives, each primitive lives in exactly one leaf. Query results are
required (and tested) to match an exhaustive scan of every triangle.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from .scene import Scene, SceneError

LEAF_SIZE = 4
MAX_DEPTH = 60


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    tmin: float = 1e-4
    tmax: float = np.inf

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError("ray direction must be normalized")
        if not self.tmin < self.tmax:
            raise ValueError("tmin must be < tmax")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class Hit:
    t: float
    world_pos: np.ndarray
    normal: np.ndarray
    material_id: int
    shaded_color: np.ndarray
    prim: int


@dataclass
class Bvh:
    """Flat node arrays; count==0 marks an internal node with two children."""

    bmin: np.ndarray
    bmax: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    perm: np.ndarray  # leaf ranges index these permuted copies
    pv0: np.ndarray
    pe1: np.ndarray
    pe2: np.ndarray

    @property
    def node_count(self):
        return len(self.bmin)


def build_bvh(scene: Scene) -> Bvh:
    v0, e1, e2, *_ = scene.pack()
    n = len(v0)
    if n == 0:
        raise SceneError("cannot build a BVH over empty geometry")
    p1 = v0 + e1
    p2 = v0 + e2
    tri_min = np.minimum(np.minimum(v0, p1), p2)
    tri_max = np.maximum(np.maximum(v0, p1), p2)
    centroids = (tri_min + tri_max) * 0.5

    perm = np.arange(n, dtype=np.int32)
    nodes = []  # (bmin, bmax, left, right, start, count)

    # explicit stack of (node_index, lo, hi, depth); children patched in later
    def alloc():
        nodes.append([np.zeros(3), np.zeros(3), -1, -1, 0, 0])
        return len(nodes) - 1

    stack = [(alloc(), 0, n, 0)]
    while stack:
        idx, lo, hi, depth = stack.pop()
        sel = perm[lo:hi]
        nb_min = tri_min[sel].min(axis=0)
        nb_max = tri_max[sel].max(axis=0)
        nodes[idx][0] = nb_min
        nodes[idx][1] = nb_max
        if hi - lo <= LEAF_SIZE or depth >= MAX_DEPTH:
            nodes[idx][4] = lo
            nodes[idx][5] = hi - lo
            continue
        axis = int(np.argmax(nb_max - nb_min))
        order = np.argsort(centroids[sel, axis], kind="stable")
        perm[lo:hi] = sel[order]
        mid = lo + (hi - lo) // 2
        li = alloc()
        ri = alloc()
        nodes[idx][2] = li
        nodes[idx][3] = ri
        stack.append((ri, mid, hi, depth + 1))
        stack.append((li, lo, mid, depth + 1))

    arr = lambda i, dt: np.ascontiguousarray([nd[i] for nd in nodes], dtype=dt)
    return Bvh(
        bmin=arr(0, np.float64),
        bmax=arr(1, np.float64),
        left=arr(2, np.int32),
        right=arr(3, np.int32),
        start=arr(4, np.int32),
        count=arr(5, np.int32),
        perm=perm,
        pv0=np.ascontiguousarray(v0[perm]),
        pe1=np.ascontiguousarray(e1[perm]),
        pe2=np.ascontiguousarray(e2[perm]),
    )


def intersect_rays(bvh: Bvh, origins, dirs, tmin=1e-4, tmax=np.inf, workers=1, impl=None):
    """Batched nearest-hit query -> (t, prim_id, bary_u, bary_v).

    Misses carry t=+inf, prim=-1. Output is independent of `workers`: rays
    are partitioned into fixed chunks with disjoint output slices.
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    nrays = len(origins)
    tmin_a = np.broadcast_to(np.asarray(tmin, np.float64), (nrays,)).copy()
    tmax_a = np.broadcast_to(np.asarray(tmax, np.float64), (nrays,)).copy()
    out_t = np.empty(nrays)
    out_pid = np.empty(nrays, dtype=np.int32)
    out_u = np.empty(nrays)
    out_v = np.empty(nrays)

    def run(sl):
        backend.intersect_batch(
            bvh.bmin, bvh.bmax, bvh.left, bvh.right, bvh.start, bvh.count,
            bvh.pv0, bvh.pe1, bvh.pe2, bvh.perm,
            origins[sl], dirs[sl], tmin_a[sl], tmax_a[sl],
            out_t[sl], out_pid[sl], out_u[sl], out_v[sl],
            impl=impl,
        )

    if workers <= 1 or nrays < 4096:
        run(slice(0, nrays))
    else:
        step = (nrays + workers - 1) // workers
        slices = [slice(i, min(i + step, nrays)) for i in range(0, nrays, step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, slices))
    return out_t, out_pid, out_u, out_v


def intersect_brute(scene: Scene, origins, dirs, tmin=1e-4, tmax=np.inf):
    """Exhaustive linear-scan reference with the kernel's tie-break rule."""
    v0, e1, e2, *_ = scene.pack()
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    nrays = len(origins)
    best_t = np.full(nrays, np.inf)
    best_pid = np.full(nrays, -1, dtype=np.int32)
    best_u = np.zeros(nrays)
    best_v = np.zeros(nrays)
    tmin_a = np.broadcast_to(np.asarray(tmin, np.float64), (nrays,))
    tmax_a = np.broadcast_to(np.asarray(tmax, np.float64), (nrays,))
    for j in range(len(v0)):
        pvec = np.cross(dirs, e2[j])
        det = pvec @ e1[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_det = 1.0 / det
        tvec = origins - v0[j]
        u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
        qvec = np.cross(tvec, e1[j])
        v = (dirs * qvec).sum(axis=1) * inv_det
        t = qvec @ e2[j] * inv_det
        ok = (
            (np.abs(det) >= 1e-14)
            & (u >= -1e-9) & (u <= 1 + 1e-9)
            & (v >= -1e-9) & (u + v <= 1 + 1e-9)
            & (t >= tmin_a) & (t <= tmax_a)
        )
        # ascending j: strict < keeps the smaller primitive id on ties
        better = ok & (((best_pid < 0) & (t <= tmax_a)) | (t < best_t))
        best_t[better] = t[better]
        best_pid[better] = j
        best_u[better] = u[better]
        best_v[better] = v[better]
    return best_t, best_pid, best_u, best_v


def hit_details(scene: Scene, bvh: Bvh, origins, dirs, t, pid, u, v):
    """Expand kernel output into positions / normals / shaded colors.

    Misses get the scene background color, +inf t, and material_id -1.
    """
    _, _, _, n0, n1, n2, mat = scene.pack()
    origins = np.asarray(origins).reshape(-1, 3)
    dirs = np.asarray(dirs).reshape(-1, 3)
    hit = pid >= 0
    pos = np.zeros_like(origins)
    normal = np.zeros_like(origins)
    color = np.empty_like(origins)
    color[:] = scene.background
    mat_ids = np.full(len(origins), -1, dtype=np.int32)
    if np.any(hit):
        hp = pid[hit]
        w = (1.0 - u[hit] - v[hit])[:, None]
        nrm = w * n0[hp] + u[hit][:, None] * n1[hp] + v[hit][:, None] * n2[hp]
        nrm /= np.maximum(np.linalg.norm(nrm, axis=1, keepdims=True), 1e-12)
        pos[hit] = origins[hit] + dirs[hit] * t[hit][:, None]
        normal[hit] = nrm
        mat_ids[hit] = mat[hp]
        color[hit] = scene.shade(pos[hit], nrm, mat[hp])
    return pos, normal, mat_ids, color


def intersect(bvh: Bvh, scene: Scene, ray: Ray):
    """Single-ray convenience wrapper returning an optional Hit."""
    t, pid, u, v = intersect_rays(bvh, ray.origin[None], ray.direction[None], ray.tmin, ray.tmax)
    if pid[0] < 0:
        return None
    pos, normal, mat_ids, color = hit_details(
        scene, bvh, ray.origin[None], ray.direction[None], t, pid, u, v
    )
    return Hit(
        t=float(t[0]),
        world_pos=pos[0],
        normal=normal[0],
        material_id=int(mat_ids[0]),
        shaded_color=color[0],
        prim=int(pid[0]),
    )
