"""Discrete weighted de Rham complex on closed curves and surfaces.

Cochains live on vertices, edges and faces. ``d[p]`` are signed incidence
matrices; ``mass[p]`` are diagonal (lumped) Hodge stars multiplied by the
weight e^{-f} sampled at the cell, so that <a, b>_{M_p} discretizes
integral <a, b> e^{-f} dvol. The weak codifferential is
delta'_p = M_{p-1}^{-1} d_{p-1}^T M_p, the adjoint of d for that pairing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import io as spio
from scipy import sparse

from ..errors import DegreeError, DimensionError, GeometryError, InputError, ShapeError
from ..manifold.backend import GeometryBackend
from ..manifold.meshes import EmbeddedMesh, mixed_voronoi_areas, triangle_cotangents


@dataclass(frozen=True)
class WeightedComplex:
    d: list  # d[p]: sparse int8, shape (#(p+1)-cells, #p-cells)
    mass: list  # mass[p]: sparse diagonal, shape (#p-cells, #p-cells)
    degrees: int
    cells: list  # cells[p]: (#p-cells, p+1) vertex indices
    stars: list  # unweighted diagonal Hodge star entries per degree
    weight: list  # e^{-f} per cell, per degree
    weight_description: str = "f = |x|^2/2"
    metadata: dict = field(default_factory=dict, compare=False)

    def size(self, p: int) -> int:
        _check_degree(self, p)
        return self.mass[p].shape[0]

    def mass_diagonal(self, p: int) -> np.ndarray:
        _check_degree(self, p)
        return self.mass[p].diagonal()

    def cell_average(self, p: int, nodal: np.ndarray) -> np.ndarray:
        """Average a vertex field over the vertices of every p-cell."""
        _check_degree(self, p)
        nodal = np.asarray(nodal, dtype=float)
        return nodal[self.cells[p]].mean(axis=1)


def _check_degree(cx, p):
    if not 0 <= p <= cx.degrees:
        raise DegreeError(f"form degree {p} outside 0..{cx.degrees}")


def _incidence(rows, cols, vals, shape):
    mat = sparse.coo_matrix((np.asarray(vals, dtype=np.int8), (rows, cols)), shape=shape)
    return mat.tocsr()


def _nodal_f(backend, weight):
    n = len(backend)
    if isinstance(weight, str):
        if weight == "gaussian":
            return backend.xsq / 2.0, "f = |x|^2/2"
        if weight == "constant":
            return np.zeros(n), "f = 0"
        raise InputError(f"unknown weight {weight!r}")
    f = np.asarray(weight, dtype=float)
    if f.shape != (n,):
        raise ShapeError(f"nodal weight field must have shape ({n},)")
    return f, "f = user nodal field"


def _circumcenter_barycentric(mesh):
    x, t = mesh.vertices, mesh.cells
    a2 = np.sum((x[t[:, 1]] - x[t[:, 2]]) ** 2, axis=1)
    b2 = np.sum((x[t[:, 2]] - x[t[:, 0]]) ** 2, axis=1)
    c2 = np.sum((x[t[:, 0]] - x[t[:, 1]]) ** 2, axis=1)
    bary = np.column_stack([a2 * (b2 + c2 - a2), b2 * (c2 + a2 - b2), c2 * (a2 + b2 - c2)])
    bary = np.clip(bary, 0.0, None)  # obtuse: clamp the circumcenter into the triangle
    return bary / bary.sum(axis=1, keepdims=True)


def _curve_complex(backend, f, desc):
    cells = backend.cells
    nv, ne = len(backend), len(cells)
    x = backend.positions
    tail, head = x[cells[:, 0]], x[cells[:, 1]]
    if backend.kind == "analytic-circle":
        # exact arc length on the circle
        r = np.sqrt(backend.radius_sq)
        cross = tail[:, 0] * head[:, 1] - tail[:, 1] * head[:, 0]
        dot = np.einsum("ij,ij->i", tail, head)
        lengths = r * np.abs(np.arctan2(cross, dot))
    else:
        lengths = np.linalg.norm(head - tail, axis=1)
    rows = np.repeat(np.arange(ne), 2)
    cols = cells.ravel()
    vals = np.tile([-1, 1], ne)
    d0 = _incidence(rows, cols, vals, (ne, nv))
    star0 = np.zeros(nv)
    np.add.at(star0, cells[:, 0], lengths / 2)
    np.add.at(star0, cells[:, 1], lengths / 2)
    star1 = 1.0 / lengths
    w0 = np.exp(-f)
    w1 = np.exp(-f[cells].mean(axis=1))
    verts = np.arange(nv)[:, None]
    return WeightedComplex(
        d=[d0],
        mass=[sparse.diags(star0 * w0, format="csr"), sparse.diags(star1 * w1, format="csr")],
        degrees=1,
        cells=[verts, cells],
        stars=[star0, star1],
        weight=[w0, w1],
        weight_description=desc,
    )


def _surface_complex(backend, f, desc):
    mesh = EmbeddedMesh(backend.positions, backend.cells)
    t = mesh.cells
    nv, nf = len(mesh.vertices), len(t)
    directed = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)  # (F, 3, 2)
    flat = directed.reshape(-1, 2)
    edges, inv = np.unique(np.sort(flat, axis=1), axis=0, return_inverse=True)
    inv = inv.reshape(nf, 3)
    ne = len(edges)
    d0 = _incidence(np.repeat(np.arange(ne), 2), edges.ravel(), np.tile([-1, 1], ne), (ne, nv))
    sign = np.where(directed[:, :, 0] < directed[:, :, 1], 1, -1)
    d1 = _incidence(np.repeat(np.arange(nf), 3), inv.ravel(), sign.ravel(), (nf, ne))

    cots = triangle_cotangents(mesh)
    # edge k of a face (k -> k+1) is opposite corner k+2
    star1 = np.zeros(ne)
    for k in range(3):
        np.add.at(star1, inv[:, k], 0.5 * cots[:, (k + 2) % 3])
    if np.any(star1 <= 0):
        raise GeometryError("non-Delaunay edge: diagonal 1-form Hodge star is not positive")
    star0 = mixed_voronoi_areas(mesh)
    area = mesh.cell_measures()
    star2 = 1.0 / area

    w0 = np.exp(-f)
    w1 = np.exp(-f[edges].mean(axis=1))
    w2 = np.exp(-np.einsum("fk,fk->f", _circumcenter_barycentric(mesh), f[t]))
    return WeightedComplex(
        d=[d0, d1],
        mass=[sparse.diags(s * w, format="csr") for s, w in ((star0, w0), (star1, w1), (star2, w2))],
        degrees=2,
        cells=[np.arange(nv)[:, None], edges, t],
        stars=[star0, star1, star2],
        weight=[w0, w1, w2],
        weight_description=desc,
    )


def build_complex(backend: GeometryBackend, weight="gaussian") -> WeightedComplex:
    """Assemble d and the weighted mass matrices for a curve or surface backend.

    ``weight`` is "gaussian" (f = |x|^2/2), "constant" (f = 0) or an array of
    nodal f values. The weight is sampled at vertices for 0-cochains and
    interpolated linearly to edge midpoints and face circumcenters.
    """
    if backend.cells is None:
        raise DimensionError(
            f"{backend.kind} backend (m={backend.intrinsic_dim}) has no cell complex")
    f, desc = _nodal_f(backend, weight)
    if backend.intrinsic_dim == 1:
        return _curve_complex(backend, f, desc)
    if backend.intrinsic_dim == 2:
        return _surface_complex(backend, f, desc)
    raise DimensionError(f"no complex for intrinsic dimension {backend.intrinsic_dim}")


def _inv_diag(mat):
    return sparse.diags(1.0 / mat.diagonal(), format="csr")


def codifferential(cx: WeightedComplex, p: int) -> sparse.csr_matrix:
    """Weak codifferential delta'_p : p-cochains -> (p-1)-cochains."""
    if not 1 <= p <= cx.degrees:
        raise DegreeError(f"codifferential needs 1 <= p <= {cx.degrees}, got {p}")
    return (_inv_diag(cx.mass[p - 1]) @ cx.d[p - 1].T.astype(float) @ cx.mass[p]).tocsr()


def hodge_laplacian(cx: WeightedComplex, p: int):
    """Stiffness/mass pair (K_p, M_p) of the weighted Hodge Laplacian d delta' + delta' d."""
    _check_degree(cx, p)
    mp = cx.mass[p]
    k = sparse.csr_matrix(mp.shape)
    if p < cx.degrees:
        dp = cx.d[p].astype(float)
        k = k + dp.T @ cx.mass[p + 1] @ dp
    if p > 0:
        dq = cx.d[p - 1].astype(float)
        k = k + mp @ dq @ _inv_diag(cx.mass[p - 1]) @ dq.T @ mp
    k = 0.5 * (k + k.T)
    return k.tocsr(), mp


def drift_apply(cx: WeightedComplex, u) -> np.ndarray:
    """Drift Laplacian u -> Delta u + <x, grad u> (positive convention), as M_0^{-1} K_0 u.

    Applied in factored form M_0^{-1} d_0^T M_1 d_0 u so that constants map
    to exactly zero.
    """
    u = np.asarray(u, dtype=float)
    nv = cx.size(0)
    if u.shape[0] != nv:
        raise ShapeError(f"function has {u.shape[0]} values, complex has {nv} vertices")
    if cx.degrees == 0:
        return np.zeros_like(u)
    d0 = cx.d[0].astype(float)
    m0 = cx.mass_diagonal(0)
    flux = cx.mass[1] @ (d0 @ u)
    out = d0.T @ flux
    return out / (m0 if u.ndim == 1 else m0[:, None])


def export_matrix_market(cx: WeightedComplex, directory) -> list[Path]:
    """Write d_p, M_p and K_p as MatrixMarket coordinate files; returns the paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for p, dp in enumerate(cx.d):
        path = out / f"d{p}.mtx"
        spio.mmwrite(str(path), dp.astype(np.int64), field="integer")
        written.append(path)
    for p in range(cx.degrees + 1):
        k, m = hodge_laplacian(cx, p)
        for name, mat in ((f"M{p}.mtx", m), (f"K{p}.mtx", k)):
            spio.mmwrite(str(out / name), mat, symmetry="symmetric")
            written.append(out / name)
    return written
