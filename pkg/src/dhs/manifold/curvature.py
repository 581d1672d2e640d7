"""Curvature of raw meshes by per-vertex jet fitting over 2-ring neighborhoods."""
from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from .backend import GeometryBackend
from .meshes import EmbeddedMesh, mixed_voronoi_areas


def _surface_frames(mesh):
    x, t = mesh.vertices, mesh.cells
    fn = np.cross(x[t[:, 1]] - x[t[:, 0]], x[t[:, 2]] - x[t[:, 0]])  # 2 * area * unit normal
    vn = np.zeros_like(x)
    for k in range(3):
        np.add.at(vn, t[:, k], fn)
    vn /= np.linalg.norm(vn, axis=1, keepdims=True)
    # first tangent: an incident edge projected onto the tangent plane
    first = np.empty(len(x), dtype=np.int64)
    first[t[:, 0]] = t[:, 1]
    first[t[:, 1]] = t[:, 2]
    first[t[:, 2]] = t[:, 0]
    e1 = x[first] - x
    e1 -= np.einsum("ij,ij->i", e1, vn)[:, None] * vn
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(vn, e1)
    return e1, e2, vn


def _two_ring(mesh):
    a = mesh.adjacency()
    a2 = (a + a @ a).tocsr()
    a2.setdiag(0)
    a2.eliminate_zeros()
    return [a2.indices[a2.indptr[i]:a2.indptr[i + 1]] for i in range(a2.shape[0])]


def _fit_surface(mesh):
    x = mesh.vertices
    e1, e2, vn = _surface_frames(mesh)
    rings = _two_ring(mesh)
    nv = len(x)
    tangent = np.empty((nv, 2, 3))
    normal = np.empty((nv, 1, 3))
    h = np.empty((nv, 1, 2, 2))
    for v in range(nv):
        d = x[rings[v]] - x[v]
        u, w, z = d @ e1[v], d @ e2[v], d @ vn[v]
        design = np.column_stack([u * u, u * w, w * w, u, w])
        (a, b, c, fu, fv), *_ = np.linalg.lstsq(design, z, rcond=None)
        xu = e1[v] + fu * vn[v]
        xv = e2[v] + fv * vn[v]
        nrm = vn[v] - fu * e1[v] - fv * e2[v]
        wlen = np.linalg.norm(nrm)
        second = np.array([[2 * a, b], [b, 2 * c]]) / wlen
        first = np.array([[xu @ xu, xu @ xv], [xu @ xv, xv @ xv]])
        r = np.linalg.cholesky(first).T  # first = r.T @ r
        rinv = np.linalg.inv(r)
        frame = np.column_stack([xu, xv]) @ rinv  # orthonormal columns
        tangent[v] = frame.T
        normal[v, 0] = nrm / wlen
        h[v, 0] = rinv.T @ second @ rinv
    return tangent, normal, h


def _fit_curve(mesh):
    x = mesh.vertices
    nv = len(x)
    nxt = np.empty(nv, dtype=np.int64)
    nxt[mesh.cells[:, 0]] = mesh.cells[:, 1]
    prv = np.empty(nv, dtype=np.int64)
    prv[mesh.cells[:, 1]] = mesh.cells[:, 0]
    t = x[nxt] - x[prv]
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    n = np.column_stack([-t[:, 1], t[:, 0]])
    tangent = np.empty((nv, 1, 2))
    normal = np.empty((nv, 1, 2))
    h = np.empty((nv, 1, 1, 1))
    for v in range(nv):
        ring = [prv[prv[v]], prv[v], nxt[v], nxt[nxt[v]]]
        d = x[ring] - x[v]
        u, z = d @ t[v], d @ n[v]
        # quartic jet through the four 2-ring neighbours; a lower-order
        # fit carries an O(h^2) bias from the symmetric u^4 term
        design = np.column_stack([u, u * u, u ** 3, u ** 4])
        (fu, a, _, _), *_ = np.linalg.lstsq(design, z, rcond=None)
        wlen = np.sqrt(1.0 + fu * fu)
        tangent[v, 0] = (t[v] + fu * n[v]) / wlen
        normal[v, 0] = (n[v] - fu * t[v]) / wlen
        h[v, 0, 0, 0] = 2.0 * a / wlen ** 3
    return tangent, normal, h


def mesh_backend(mesh: EmbeddedMesh) -> GeometryBackend:
    """Backend for a closed triangle surface in R^3 or closed polyline in R^2.

    Frames start from averaged element normals and are corrected by the
    gradient of the fitted jet; h is the fitted second fundamental form in
    that frame. Quadrature weights are lumped vertex measures times the
    Gaussian factor at the vertex.
    """
    mesh.validate()
    m = mesh.intrinsic_dim
    x = mesh.vertices
    if m == 2:
        tangent, normal, h = _fit_surface(mesh)
        lumped = mixed_voronoi_areas(mesh)
        kind = "mesh-surface"
    elif m == 1:
        if len(x) < 5:
            raise DimensionError("curve curvature fitting needs at least 5 vertices")
        tangent, normal, h = _fit_curve(mesh)
        lengths = mesh.cell_measures()
        lumped = np.zeros(len(x))
        np.add.at(lumped, mesh.cells[:, 0], lengths / 2)
        np.add.at(lumped, mesh.cells[:, 1], lengths / 2)
        kind = "mesh-curve"
    else:
        raise DimensionError(f"meshes of intrinsic dimension {m} are not supported")
    xsq = np.einsum("ij,ij->i", x, x)
    return GeometryBackend(
        kind=kind,
        intrinsic_dim=m,
        ambient_dim=m + 1,
        positions=x,
        tangent=tangent,
        normal=normal,
        second_fundamental=h,
        quad_weights=lumped * np.exp(-xsq / 2.0),
        cells=mesh.cells,
        estimated=True,
    )
