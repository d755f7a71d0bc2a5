"""Texture baking and repair for UV-mapped triangle meshes.

Multi-view images are fused into a UV texture with occlusion-aware cosine
weighting, unobserved texels are filled by 3D KNN colour propagation, and
chart seams are smoothed in 3D after upscaling.
"""
from .camera import Camera, default_view_ring
from .errors import TexweaveError
from .mesh import TriangleMesh, load_mesh, normalize_mesh, save_mesh
from .pipeline import PipelineConfig, run_pipeline
from .texture import UvTexture

__version__ = "0.1.0"

__all__ = [
    "Camera", "default_view_ring", "TexweaveError", "TriangleMesh", "load_mesh", "normalize_mesh",
    "save_mesh", "PipelineConfig", "run_pipeline", "UvTexture",
]
