"""Sampled immersed submanifolds x: M^m -> R^n with curvature data.

A :class:`GeometryBackend` stores per-node arrays (positions, orthonormal
tangent and normal frames, second fundamental form, quadrature weights);
:class:`SamplePoint` is the per-node view used by pointwise kernels.

Conventions: ``h[q, a, i, j] = <D_{e_j} e_i, e_a>`` for the a-th normal, so a
round sphere of radius r with outward normal has h = -(1/r) delta and mean
curvature vector H = -(m/r^2) x. The self-shrinker equation is H = -x^perp.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np

from ..errors import DimensionError, InputError
from .meshes import EmbeddedMesh, icosphere, mixed_voronoi_areas, regular_polygon

KINDS = ("analytic-sphere", "analytic-circle", "mesh-surface", "mesh-curve")


@dataclass(frozen=True)
class SymmetricTwoTensor:
    entries: np.ndarray

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise DimensionError("a 2-tensor must be a square matrix")
        if not np.allclose(t, t.T, rtol=0, atol=1e-12 * max(1.0, np.abs(t).max())):
            raise InputError("tensor is not symmetric")
        t = 0.5 * (t + t.T)
        t.flags.writeable = False
        object.__setattr__(self, "entries", t)

    @property
    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self.entries ** 2)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SamplePoint:
    position: np.ndarray
    tangent_frame: np.ndarray  # (m, n), rows orthonormal
    normal_frame: np.ndarray  # (n - m, n)
    second_fundamental: np.ndarray  # (n - m, m, m)
    quad_weight: float

    @property
    def xsq(self) -> float:
        return float(self.position @ self.position)

    @property
    def mean_curvature(self) -> np.ndarray:
        traces = np.trace(self.second_fundamental, axis1=1, axis2=2)
        return traces @ self.normal_frame

    @property
    def h_sq(self) -> float:
        return float(np.sum(self.second_fundamental ** 2))

    @property
    def H_sq(self) -> float:
        hm = self.mean_curvature
        return float(hm @ hm)


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GeometryBackend:
    kind: str
    intrinsic_dim: int
    ambient_dim: int
    positions: np.ndarray  # (N, n)
    tangent: np.ndarray  # (N, m, n)
    normal: np.ndarray  # (N, n - m, n)
    second_fundamental: np.ndarray  # (N, n - m, m, m)
    quad_weights: np.ndarray  # (N,)
    cells: np.ndarray | None = None  # (C, m + 1) connectivity for complexes
    radius_sq: float | None = None  # analytic spheres/circles only
    estimated: bool = False
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown backend kind {self.kind!r}")
        for name in ("positions", "tangent", "normal", "second_fundamental", "quad_weights"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        if self.cells is not None:
            c = np.ascontiguousarray(self.cells, dtype=np.int64)
            c.flags.writeable = False
            object.__setattr__(self, "cells", c)
        m, n = self.intrinsic_dim, self.ambient_dim
        nq = len(self.positions)
        if self.positions.shape != (nq, n) or self.tangent.shape != (nq, m, n):
            raise DimensionError("frame arrays inconsistent with (m, n)")
        if self.normal.shape != (nq, n - m, n):
            raise DimensionError("normal frame has wrong shape")
        if self.second_fundamental.shape != (nq, n - m, m, m):
            raise DimensionError("second fundamental form has wrong shape")
        if np.any(self.quad_weights <= 0):
            raise InputError("quadrature weights must be strictly positive")

    def __len__(self):
        return len(self.positions)

    @property
    def is_analytic(self) -> bool:
        return self.kind.startswith("analytic")

    @property
    def xsq(self) -> np.ndarray:
        return np.einsum("qa,qa->q", self.positions, self.positions)

    @property
    def mean_curvature(self) -> np.ndarray:
        traces = np.trace(self.second_fundamental, axis1=2, axis2=3)
        return np.einsum("qa,qan->qn", traces, self.normal)

    @property
    def h_sq(self) -> np.ndarray:
        return np.sum(self.second_fundamental ** 2, axis=(1, 2, 3))

    @property
    def H_sq(self) -> np.ndarray:
        hm = self.mean_curvature
        return np.einsum("qn,qn->q", hm, hm)

    @property
    def weighted_volume(self) -> float:
        return float(self.quad_weights.sum())

    def point(self, q: int) -> SamplePoint:
        return SamplePoint(
            position=self.positions[q],
            tangent_frame=self.tangent[q],
            normal_frame=self.normal[q],
            second_fundamental=self.second_fundamental[q],
            quad_weight=float(self.quad_weights[q]),
        )

    @property
    def sample_points(self) -> list[SamplePoint]:
        return [self.point(q) for q in range(len(self))]

    def mesh(self) -> EmbeddedMesh:
        if self.cells is None:
            raise DimensionError(f"{self.kind} backend with m={self.intrinsic_dim} carries no cell complex")
        return EmbeddedMesh(self.positions, self.cells)


def sphere_volume(m: int, radius: float = 1.0) -> float:
    """Riemannian volume of the round m-sphere of the given radius."""
    return 2.0 * pi ** ((m + 1) / 2) / gamma((m + 1) / 2) * radius ** m


def _householder_complement(nu):
    """Orthonormal bases of the complement of unit vectors nu (N, k) -> (N, k-1, k)."""
    nq, k = nu.shape
    e1 = np.zeros(k)
    e1[0] = 1.0
    s = np.where(nu[:, 0] >= 0, 1.0, -1.0)
    w = e1[None, :] + s[:, None] * nu
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    refl = np.eye(k)[None] - 2.0 * w[:, :, None] * w[:, None, :]
    return refl[:, 1:, :]  # rows 2..k of a symmetric reflection


def _design_nodes(m):
    """Unit-sphere nodes on S^m: cross-polytope and hypercube vertices (3-designs)."""
    k = m + 1
    cross = np.vstack([np.eye(k), -np.eye(k)])
    parts = [(cross, 0.5 if k <= 11 else 1.0)]
    if k <= 11:
        grid = np.array(np.meshgrid(*([[-1.0, 1.0]] * k), indexing="ij")).reshape(k, -1).T
        parts.append((grid / np.sqrt(k), 0.5))
    nodes = np.vstack([p for p, _ in parts])
    weights = np.concatenate([np.full(len(p), share / len(p)) for p, share in parts])
    return nodes, weights


def sphere_backend(m: int, ambient_n: int | None = None, samples: int | None = None,
                   radius_sq: float | None = None) -> GeometryBackend:
    """Analytic round sphere S^m(r) in R^n, r^2 = m by default (the shrinking sphere).

    ``samples`` is the node count for circles (m=1, default 256), the
    icosphere subdivision level for m=2 (default 4, 2562 nodes), and is
    ignored for m >= 3 where a fixed degree-3 spherical design is used and
    no cell complex is available.
    """
    if m < 1:
        raise DimensionError("intrinsic dimension must be >= 1")
    n = m + 1 if ambient_n is None else int(ambient_n)
    if n < m + 1:
        raise DimensionError(f"a sphere S^{m} needs ambient dimension >= {m + 1}, got {n}")
    r2 = float(m if radius_sq is None else radius_sq)
    if r2 <= 0:
        raise DimensionError("radius must be positive")
    r = np.sqrt(r2)
    k = m + 1
    cells = None
    if m == 1:
        count = 256 if samples is None else int(samples)
        if count < 3:
            raise DimensionError("a circle needs at least 3 nodes")
        mesh = regular_polygon(count, radius=1.0)
        unit, cells = mesh.vertices, mesh.cells
        w = np.full(count, 1.0 / count)
    elif m == 2:
        level = 4 if samples is None else int(samples)
        if level < 0:
            raise DimensionError("icosphere level must be >= 0")
        mesh = icosphere(level)
        unit, cells = mesh.vertices, mesh.cells
        w = mixed_voronoi_areas(mesh)
        w = w / w.sum()
    else:
        unit, w = _design_nodes(m)
    nq = len(unit)
    positions = np.zeros((nq, n))
    positions[:, :k] = r * unit
    tangent = np.zeros((nq, m, n))
    tangent[:, :, :k] = _householder_complement(unit)
    normal = np.zeros((nq, n - m, n))
    normal[:, 0, :k] = unit
    for a in range(1, n - m):
        normal[:, a, k + a - 1] = 1.0
    h = np.zeros((nq, n - m, m, m))
    h[:, 0] = -np.eye(m) / r
    quad = w * sphere_volume(m, r) * np.exp(-r2 / 2.0)
    return GeometryBackend(
        kind="analytic-circle" if m == 1 else "analytic-sphere",
        intrinsic_dim=m,
        ambient_dim=n,
        positions=positions,
        tangent=tangent,
        normal=normal,
        second_fundamental=h,
        quad_weights=quad,
        cells=cells,
        radius_sq=r2,
        metadata={"samples": samples},
    )


def circle_backend(samples: int = 256, radius_sq: float = 1.0) -> GeometryBackend:
    return sphere_backend(1, 2, samples, radius_sq)


def shrinker_residual(backend: GeometryBackend) -> float:
    """max over nodes of |H + x^perp|; zero exactly on the sphere of radius sqrt(m)."""
    if backend.is_analytic and backend.radius_sq is not None:
        # |H + x^perp| = |r - m/r| = |r^2 - m| / r at every node
        return abs(backend.radius_sq - backend.intrinsic_dim) / np.sqrt(backend.radius_sq)
    coeff = np.einsum("qan,qn->qa", backend.normal, backend.positions)
    xperp = np.einsum("qa,qan->qn", coeff, backend.normal)
    res = backend.mean_curvature + xperp
    return float(np.sqrt(np.einsum("qn,qn->q", res, res)).max())


def hessian_half_xsq(point: SamplePoint, route: str = "position") -> SymmetricTwoTensor:
    """Hessian of |x|^2/2 in the tangent frame: T_ij = <h_ij, x> + delta_ij.

    ``route="mean_curvature"`` replaces x^perp by -H, which agrees with the
    default only on self-shrinkers.
    """
    m = point.tangent_frame.shape[0]
    if route == "position":
        coeff = point.normal_frame @ point.position
    elif route == "mean_curvature":
        coeff = -(point.normal_frame @ point.mean_curvature)
    else:
        raise InputError(f"unknown route {route!r}")
    t = np.einsum("a,aij->ij", coeff, point.second_fundamental) + np.eye(m)
    return SymmetricTwoTensor(t)


def hessian_half_xsq_field(backend: GeometryBackend) -> np.ndarray:
    """(N, m, m) stack of hessian_half_xsq over all nodes."""
    coeff = np.einsum("qan,qn->qa", backend.normal, backend.positions)
    m = backend.intrinsic_dim
    return np.einsum("qa,qaij->qij", coeff, backend.second_fundamental) + np.eye(m)[None]


def frame_gradient_identity(point: SamplePoint) -> float:
    """sum_A |grad x^A|^2 = sum_A sum_i <e_i, E_A>^2; equals m for an orthonormal frame."""
    return float(np.sum(point.tangent_frame ** 2))
