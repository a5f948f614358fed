"""Scene representation, YAML loading, and local shading.

A scene is a list of triangle meshes (one material per mesh), a material
table, and point/directional emitters. Geometry can be inlined in the
scene file, referenced as a Wavefront OBJ, or produced by a named
generator (the bundled fixtures use generators so they stay readable).

Shading of ray hits is deterministic two-sided Lambertian from the scene
lights plus the material's emissive term; emissive values above the
diffuse range mark the highlights that produce bokeh.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml


class SceneError(ValueError):
    """Raised for malformed or out-of-range scene files; names the field."""


@dataclass(frozen=True)
class Material:
    name: str
    albedo: tuple
    emissive: float = 0.0
    specular: float = 0.0

    def __post_init__(self):
        if not all(0.0 <= c <= 1.0 for c in self.albedo):
            raise SceneError(f"material {self.name!r}: albedo channels must be in [0,1]")
        if not math.isfinite(self.emissive) or self.emissive < 0:
            raise SceneError(f"material {self.name!r}: emissive must be finite and >= 0")
        if not 0.0 <= self.specular <= 1.0:
            raise SceneError(f"material {self.name!r}: specular must be in [0,1]")


@dataclass(frozen=True)
class Light:
    kind: str  # "directional" | "point"
    color: tuple
    direction: tuple = None  # propagation direction (directional)
    position: tuple = None  # world position (point)


@dataclass
class Mesh:
    name: str
    vertices: np.ndarray  # (n, 3) float64
    normals: np.ndarray  # (n, 3) float64, unit
    triangles: np.ndarray  # (m, 3) int32
    material: int  # index into Scene.materials


@dataclass
class Scene:
    meshes: list
    materials: list
    lights: list
    background: np.ndarray
    ambient: np.ndarray
    camera_defaults: dict = field(default_factory=dict)
    _pack: tuple = field(default=None, repr=False)

    def validate(self):
        if not self.meshes:
            raise SceneError("scene has no meshes")
        for mesh in self.meshes:
            if not (0 <= mesh.material < len(self.materials)):
                raise SceneError(f"mesh {mesh.name!r}: material index {mesh.material} out of range")
            if mesh.triangles.size and mesh.triangles.max() >= len(mesh.vertices):
                raise SceneError(
                    f"mesh {mesh.name!r}: triangle index {int(mesh.triangles.max())} "
                    f"over {len(mesh.vertices)} vertices"
                )
            if mesh.triangles.size and mesh.triangles.min() < 0:
                raise SceneError(f"mesh {mesh.name!r}: negative triangle index")
            lens = np.linalg.norm(mesh.normals, axis=1)
            if mesh.normals.size and np.max(np.abs(lens - 1.0)) > 1e-4:
                raise SceneError(f"mesh {mesh.name!r}: vertex normals are not unit length")
        return self

    @property
    def triangle_count(self):
        return sum(len(m.triangles) for m in self.meshes)

    def pack(self):
        """Flatten all meshes into triangle arrays for the ray kernels.

        Returns (v0, e1, e2, n0, n1, n2, mat_id); cached after first call.
        Scene is immutable once packed.
        """
        if self._pack is None:
            v0s, e1s, e2s, n0s, n1s, n2s, mats = [], [], [], [], [], [], []
            for mesh in self.meshes:
                tri = mesh.triangles
                p = mesh.vertices[tri[:, 0]], mesh.vertices[tri[:, 1]], mesh.vertices[tri[:, 2]]
                v0s.append(p[0])
                e1s.append(p[1] - p[0])
                e2s.append(p[2] - p[0])
                n0s.append(mesh.normals[tri[:, 0]])
                n1s.append(mesh.normals[tri[:, 1]])
                n2s.append(mesh.normals[tri[:, 2]])
                mats.append(np.full(len(tri), mesh.material, dtype=np.int32))
            self._pack = tuple(
                np.ascontiguousarray(np.concatenate(a), dtype=np.float64) for a in (v0s, e1s, e2s, n0s, n1s, n2s)
            ) + (np.concatenate(mats),)
        return self._pack

    # -- shading ---------------------------------------------------------

    def shade(self, positions, normals, mat_ids):
        """Two-sided Lambertian + emissive for an array of hit points."""
        positions = np.atleast_2d(positions)
        normals = np.atleast_2d(normals)
        mat_ids = np.atleast_1d(mat_ids)
        albedo = np.array([m.albedo for m in self.materials])[mat_ids]
        emissive = np.array([m.emissive for m in self.materials])[mat_ids]
        irr = np.broadcast_to(self.ambient, positions.shape).copy()
        for light in self.lights:
            if light.kind == "directional":
                l = -np.asarray(light.direction, dtype=np.float64)
                l /= np.linalg.norm(l)
                ndotl = np.abs(normals @ l)
                irr += ndotl[:, None] * np.asarray(light.color)
            else:
                to_l = np.asarray(light.position, dtype=np.float64) - positions
                dist2 = np.maximum(np.sum(to_l * to_l, axis=1), 1e-6)
                l = to_l / np.sqrt(dist2)[:, None]
                ndotl = np.abs(np.sum(normals * l, axis=1))
                irr += (ndotl / dist2)[:, None] * np.asarray(light.color)
        return albedo * irr + albedo * emissive[:, None]

    def material_emissive(self, mat_ids):
        return np.array([m.emissive for m in self.materials])[mat_ids]


# -- loading --------------------------------------------------------------

_CAMERA_KEYS = {
    "position",
    "look_at",
    "up",
    "aperture",
    "focal_length",
    "focus_distance",
    "sensor_width",
}
_MATERIAL_KEYS = {"name", "albedo", "emissive", "specular"}
_LIGHT_KEYS = {"kind", "color", "direction", "position"}
_MESH_KEYS = {"name", "material", "vertices", "normals", "triangles", "obj", "generate"}
_TOP_KEYS = {"camera", "background", "ambient", "materials", "lights", "meshes"}


def _check_keys(mapping, allowed, where):
    unknown = set(mapping) - allowed
    if unknown:
        raise SceneError(f"{where}: unknown field(s) {sorted(unknown)}")


def _vec3(value, where):
    try:
        v = [float(c) for c in value]
    except (TypeError, ValueError):
        raise SceneError(f"{where}: expected a 3-vector") from None
    if len(v) != 3:
        raise SceneError(f"{where}: expected 3 components, got {len(v)}")
    return tuple(v)


def load_scene(path) -> Scene:
    """Parse and validate a scene file; deterministic for identical input."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = f" at line {mark.line + 1}" if mark else ""
            raise SceneError(f"{path}: parse error{line}: {exc}") from exc
    if not isinstance(doc, dict):
        raise SceneError(f"{path}: top level must be a mapping")
    _check_keys(doc, _TOP_KEYS, path)

    materials = []
    mat_index = {}
    for i, m in enumerate(doc.get("materials", [])):
        where = f"materials[{i}]"
        _check_keys(m, _MATERIAL_KEYS, where)
        name = m.get("name", f"mat{i}")
        mat = Material(
            name=name,
            albedo=_vec3(m.get("albedo", (0.5, 0.5, 0.5)), where + ".albedo"),
            emissive=float(m.get("emissive", 0.0)),
            specular=float(m.get("specular", 0.0)),
        )
        if name in mat_index:
            raise SceneError(f"{where}: duplicate material name {name!r}")
        mat_index[name] = i
        materials.append(mat)
    if not materials:
        materials.append(Material(name="default", albedo=(0.7, 0.7, 0.7)))
        mat_index["default"] = 0

    lights = []
    for i, l in enumerate(doc.get("lights", [])):
        where = f"lights[{i}]"
        _check_keys(l, _LIGHT_KEYS, where)
        kind = l.get("kind")
        if kind not in ("directional", "point"):
            raise SceneError(f"{where}.kind: expected 'directional' or 'point', got {kind!r}")
        color = _vec3(l.get("color", (1.0, 1.0, 1.0)), where + ".color")
        if kind == "directional":
            if "direction" not in l:
                raise SceneError(f"{where}: directional light needs 'direction'")
            lights.append(Light(kind=kind, color=color, direction=_vec3(l["direction"], where + ".direction")))
        else:
            if "position" not in l:
                raise SceneError(f"{where}: point light needs 'position'")
            lights.append(Light(kind=kind, color=color, position=_vec3(l["position"], where + ".position")))

    meshes = []
    base = os.path.dirname(os.path.abspath(path))
    for i, m in enumerate(doc.get("meshes", [])):
        where = f"meshes[{i}]"
        _check_keys(m, _MESH_KEYS, where)
        name = m.get("name", f"mesh{i}")
        mat_name = m.get("material")
        if mat_name not in mat_index:
            raise SceneError(f"{where}.material: unknown material {mat_name!r}")
        sources = [k for k in ("vertices", "obj", "generate") if k in m]
        if len(sources) != 1:
            raise SceneError(f"{where}: needs exactly one of vertices/obj/generate")
        if "vertices" in m:
            verts = np.asarray(m["vertices"], dtype=np.float64)
            if verts.ndim != 2 or verts.shape[1] != 3:
                raise SceneError(f"{where}.vertices: expected an Nx3 array")
            if "triangles" not in m:
                raise SceneError(f"{where}: inline vertices need 'triangles'")
            tris = np.asarray(m["triangles"], dtype=np.int32)
            if tris.ndim != 2 or tris.shape[1] != 3:
                raise SceneError(f"{where}.triangles: expected an Mx3 index array")
            if tris.size and (tris.max() >= len(verts) or tris.min() < 0):
                raise SceneError(
                    f"{where}.triangles: index {int(tris.max())} over {len(verts)} vertices"
                )
            if "normals" in m:
                normals = np.asarray(m["normals"], dtype=np.float64)
                if normals.shape != verts.shape:
                    raise SceneError(f"{where}.normals: shape must match vertices")
            else:
                normals = _face_average_normals(verts, tris)
        elif "obj" in m:
            verts, normals, tris = load_obj(os.path.join(base, m["obj"]))
        else:
            verts, normals, tris = generate_mesh(m["generate"], where + ".generate")
        meshes.append(Mesh(name=name, vertices=verts, normals=normals, triangles=tris, material=mat_index[mat_name]))

    cam = doc.get("camera", {})
    _check_keys(cam, _CAMERA_KEYS, "camera")

    scene = Scene(
        meshes=meshes,
        materials=materials,
        lights=lights,
        background=np.asarray(_vec3(doc.get("background", (0.05, 0.06, 0.08)), "background")),
        ambient=np.asarray(_vec3(doc.get("ambient", (0.08, 0.08, 0.08)), "ambient")),
        camera_defaults=dict(cam),
    )
    return scene.validate()


def load_obj(path):
    """Minimal Wavefront reader: v / vn / f (triangulated by fan)."""
    verts, normals_in, faces = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                verts.append([float(c) for c in parts[1:4]])
            elif tag == "vn":
                normals_in.append([float(c) for c in parts[1:4]])
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    vi = tok.split("/")[0]
                    idx.append(int(vi) - 1 if int(vi) > 0 else len(verts) + int(vi))
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
            elif tag in ("vt", "o", "g", "s", "usemtl", "mtllib"):
                continue
            else:
                raise SceneError(f"{path}:{lineno}: unsupported OBJ record {tag!r}")
    v = np.asarray(verts, dtype=np.float64)
    t = np.asarray(faces, dtype=np.int32)
    if t.size and (t.max() >= len(v) or t.min() < 0):
        raise SceneError(f"{path}: face index out of range")
    n = _face_average_normals(v, t)
    return v, n, t


def _face_average_normals(verts, tris):
    """Area-weighted vertex normals; isolated vertices get +y."""
    n = np.zeros_like(verts)
    if tris.size:
        p0, p1, p2 = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
        face_n = np.cross(p1 - p0, p2 - p0)
        for k in range(3):
            np.add.at(n, tris[:, k], face_n)
    lens = np.linalg.norm(n, axis=1)
    zero = lens < 1e-12
    n[zero] = (0.0, 1.0, 0.0)
    lens[zero] = 1.0
    return n / lens[:, None]


# -- procedural generators -------------------------------------------------


def generate_mesh(spec, where):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SceneError(f"{where}: generator needs a 'kind'")
    kind = spec["kind"]
    args = {k: v for k, v in spec.items() if k != "kind"}
    try:
        maker = _GENERATORS[kind]
    except KeyError:
        raise SceneError(f"{where}.kind: unknown generator {kind!r}") from None
    try:
        return maker(**args)
    except TypeError as exc:
        raise SceneError(f"{where}: {exc}") from None


def gen_quad(center, u, v):
    """Rectangle spanned by half-extent vectors u and v (two triangles)."""
    c = np.asarray(center, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    verts = np.array([c - u - v, c + u - v, c + u + v, c - u + v])
    tris = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    n = np.cross(u, v)
    n /= np.linalg.norm(n)
    return verts, np.tile(n, (4, 1)), tris


def gen_grid(center, u, v, nu=8, nv=8):
    """Subdivided rectangle, useful for large walls/floors."""
    c = np.asarray(center, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    us = np.linspace(-1.0, 1.0, int(nu) + 1)
    vs = np.linspace(-1.0, 1.0, int(nv) + 1)
    verts = np.array([c + a * u + b * v for b in vs for a in us])
    tris = []
    for j in range(int(nv)):
        for i in range(int(nu)):
            a = j * (int(nu) + 1) + i
            b = a + 1
            cidx = a + int(nu) + 1
            d = cidx + 1
            tris += [[a, b, d], [a, d, cidx]]
    n = np.cross(u, v)
    n /= np.linalg.norm(n)
    return verts, np.tile(n, (len(verts), 1)), np.asarray(tris, dtype=np.int32)


def gen_checker_tiles(origin, u, v, nu=8, nv=8, parity=0):
    """Every other tile of an nu x nv grid; two instances give a checkerboard."""
    o = np.asarray(origin, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    verts, tris = [], []
    for j in range(int(nv)):
        for i in range(int(nu)):
            if (i + j) % 2 != int(parity):
                continue
            base = len(verts)
            p = o + i * u + j * v
            verts += [p, p + u, p + u + v, p + v]
            tris += [[base, base + 1, base + 2], [base, base + 2, base + 3]]
    if not verts:
        raise SceneError("checker_tiles: empty tile set")
    n = np.cross(u, v)
    n /= np.linalg.norm(n)
    verts = np.asarray(verts)
    return verts, np.tile(n, (len(verts), 1)), np.asarray(tris, dtype=np.int32)


def gen_sphere(center, radius, subdiv=16):
    """Lat-long sphere with smooth normals."""
    c = np.asarray(center, dtype=np.float64)
    nlat = max(3, int(subdiv))
    nlon = 2 * nlat
    verts, norms = [], []
    for j in range(nlat + 1):
        theta = math.pi * j / nlat
        for i in range(nlon):
            phi = 2.0 * math.pi * i / nlon
            n = np.array(
                [math.sin(theta) * math.cos(phi), math.cos(theta), math.sin(theta) * math.sin(phi)]
            )
            verts.append(c + radius * n)
            norms.append(n)
    tris = []
    for j in range(nlat):
        for i in range(nlon):
            a = j * nlon + i
            b = j * nlon + (i + 1) % nlon
            c2 = (j + 1) * nlon + i
            d = (j + 1) * nlon + (i + 1) % nlon
            if j > 0:
                tris.append([a, b, c2])
            if j < nlat - 1:
                tris.append([b, d, c2])
    return np.asarray(verts), np.asarray(norms), np.asarray(tris, dtype=np.int32)


def gen_box(box_min, box_max):
    """Axis-aligned box, 12 triangles, flat normals."""
    lo = np.asarray(box_min, dtype=np.float64)
    hi = np.asarray(box_max, dtype=np.float64)
    verts, norms, tris = [], [], []
    for axis in range(3):
        for side, w in ((lo[axis], -1.0), (hi[axis], 1.0)):
            a1, a2 = (axis + 1) % 3, (axis + 2) % 3
            quad = []
            for s1, s2 in ((0, 0), (1, 0), (1, 1), (0, 1)):
                p = np.empty(3)
                p[axis] = side
                p[a1] = [lo[a1], hi[a1]][s1]
                p[a2] = [lo[a2], hi[a2]][s2]
                quad.append(p)
            n = np.zeros(3)
            n[axis] = w
            base = len(verts)
            verts += quad
            norms += [n] * 4
            order = [0, 1, 2, 0, 2, 3] if w > 0 else [0, 2, 1, 0, 3, 2]
            tris += [[base + order[0], base + order[1], base + order[2]],
                     [base + order[3], base + order[4], base + order[5]]]
    return np.asarray(verts), np.asarray(norms), np.asarray(tris, dtype=np.int32)


_GENERATORS = {
    "quad": gen_quad,
    "grid": gen_grid,
    "checker_tiles": gen_checker_tiles,
    "sphere": gen_sphere,
    "box": gen_box,
}
