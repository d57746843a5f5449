"""Depth completion with compact triangle meshes for aerial keyframes.

Kernels run under numba unless ``TERRAMESH_BACKEND=numpy`` is set.
"""
from .geometry import Camera, DepthImage, TriangleMesh

__version__ = "0.1.0"

__all__ = ["Camera", "DepthImage", "TriangleMesh", "__version__"]
