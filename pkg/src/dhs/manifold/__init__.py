from .backend import (
    GeometryBackend,
    SamplePoint,
    SymmetricTwoTensor,
    circle_backend,
    frame_gradient_identity,
    hessian_half_xsq,
    hessian_half_xsq_field,
    shrinker_residual,
    sphere_backend,
    sphere_volume,
)
from .curvature import mesh_backend
from .meshes import EmbeddedMesh, icosphere, read_mesh, regular_polygon

__all__ = [
    "EmbeddedMesh", "GeometryBackend", "SamplePoint", "SymmetricTwoTensor",
    "circle_backend", "frame_gradient_identity", "hessian_half_xsq",
    "hessian_half_xsq_field", "icosphere", "mesh_backend", "read_mesh",
    "regular_polygon", "shrinker_residual", "sphere_backend", "sphere_volume",
]
