import numpy as np
import pytest

from hybriddof.bvh import build_bvh
from hybriddof.camera import ThinLensCamera
from hybriddof.scene import Material, Mesh, Scene, gen_box, gen_quad, gen_sphere


def make_scene(meshes, materials, lights=(), background=(0.1, 0.1, 0.15), ambient=(0.08, 0.08, 0.08)):
    return Scene(
        meshes=list(meshes),
        materials=list(materials),
        lights=list(lights),
        background=np.asarray(background, dtype=np.float64),
        ambient=np.asarray(ambient, dtype=np.float64),
    ).validate()


@pytest.fixture(scope="session")
def sphere_scene():
    v, n, t = gen_sphere([0.0, 0.0, 0.0], 1.0, subdiv=32)
    return make_scene([Mesh("sphere", v, n, t, 0)], [Material("gray", (0.6, 0.6, 0.6))])


@pytest.fixture(scope="session")
def sphere_bvh(sphere_scene):
    return build_bvh(sphere_scene)


@pytest.fixture(scope="session")
def box_scene():
    v, n, t = gen_box([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0])
    return make_scene([Mesh("box", v, n, t, 0)], [Material("gray", (0.5, 0.5, 0.5))])


@pytest.fixture
def desk_camera():
    return ThinLensCamera.look_at(
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 1.0),
        aperture=0.035,
        focal_length=0.05,
        focus_distance=2.0,
        sensor_width=0.036,
        width=1920,
        height=1080,
    )


def small_camera(width=64, height=36, **kw):
    params = dict(
        aperture=0.035,
        focal_length=0.05,
        focus_distance=2.0,
        sensor_width=0.036,
        width=width,
        height=height,
    )
    params.update(kw)
    return ThinLensCamera.look_at((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), **params)


@pytest.fixture
def wall_scene_factory():
    """Fronto-parallel quad wall at a given depth, lit head-on (constant shade)."""

    def make(z, half_w=4.0, half_h=3.0, albedo=(0.45, 0.5, 0.6), emissive=0.0):
        from hybriddof.scene import Light

        v, n, t = gen_quad([0.0, 0.0, z], [half_w, 0.0, 0.0], [0.0, half_h, 0.0])
        return make_scene(
            [Mesh("wall", v, n, t, 0)],
            [Material("paint", albedo, emissive=emissive)],
            lights=[Light(kind="directional", color=(0.8, 0.8, 0.8), direction=(0.0, 0.0, 1.0))],
        )

    return make
