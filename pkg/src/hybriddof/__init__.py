"""CPU hybrid depth-of-field renderer.

Post-process gather DoF augmented with adaptively ray-traced, temporally
accumulated, spatially reconstructed semi-transparencies, plus a
ground-truth comparator and a live-steerable viewer service.
"""

__version__ = "0.1.0"

from .backend import BACKEND
from .pipeline import CameraPath, Pipeline, PipelineConfig, bundled_scene_path, open_pipeline
from .scene import Scene, SceneError, load_scene

__all__ = [
    "BACKEND",
    "CameraPath",
    "Pipeline",
    "PipelineConfig",
    "Scene",
    "SceneError",
    "bundled_scene_path",
    "load_scene",
    "open_pipeline",
    "__version__",
]
