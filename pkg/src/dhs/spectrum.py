"""Generalized symmetric eigenproblems K u = lambda M u and closed-form oracles."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.linalg as sla
from scipy import sparse
from scipy.sparse import linalg as spla

from .complex.assembly import WeightedComplex, build_complex, drift_apply, hodge_laplacian
from .errors import InputError, OracleUnavailableError, SolverError
from .manifold.backend import GeometryBackend, sphere_backend

log = logging.getLogger(__name__)

DEFAULT_SEED = 20240607
DENSE_LIMIT = 2000
SOLVER_TOL = 1e-8


@dataclass
class Spectrum:
    degree: int
    eigenvalues: np.ndarray
    eigenforms: np.ndarray | None = None  # (dim, count), M-orthonormal columns
    residuals: np.ndarray | None = None
    cluster_tol: float | None = None
    clusters: list = field(default_factory=list)
    source: str = "discrete"

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(self.eigenvalues) < 0):
            raise InputError("eigenvalues must be nondecreasing")
        if self.cluster_tol is None:
            top = float(self.eigenvalues[-1]) if len(self.eigenvalues) else 0.0
            self.cluster_tol = 1e-6 * (abs(top) + 1.0)
        if not self.clusters:
            self.clusters = cluster_indices(self.eigenvalues, self.cluster_tol)

    def __len__(self):
        return len(self.eigenvalues)

    def to_dict(self) -> dict:
        res = self.residuals
        return {
            "degree": int(self.degree),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residuals": [float(v) for v in res] if res is not None else [],
            "clusters": [list(map(int, c)) for c in self.clusters],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "Spectrum":
        res = data.get("residuals") or None
        return cls(
            degree=int(data["degree"]),
            eigenvalues=np.asarray(data["eigenvalues"], dtype=float),
            residuals=None if res is None else np.asarray(res, dtype=float),
            source=data.get("source", "file"),
        )


def cluster_indices(values, tol) -> list[list[int]]:
    """Group consecutive indices whose eigenvalues differ by less than tol."""
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups and v - values[groups[-1][-1]] < tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _check_mass(m):
    if sparse.issparse(m):
        off = m - sparse.diags(m.diagonal())
        if off.count_nonzero() == 0:
            if np.any(m.diagonal() <= 0):
                raise InputError("mass matrix is not positive definite")
            return
        if m.shape[0] > DENSE_LIMIT:
            return
        m = m.toarray()
    try:
        np.linalg.cholesky(np.asarray(m))
    except np.linalg.LinAlgError as exc:
        raise InputError("mass matrix is not positive definite") from exc


def _fix_signs(vecs):
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _residuals(k, m, vals, vecs):
    kv = k @ vecs
    mv = m @ vecs
    num = np.linalg.norm(kv - mv * vals, axis=0)
    den = np.linalg.norm(mv, axis=0)
    return num / np.where(den > 0, den, 1.0)


def _m_orthonormalize(v, m, basis=None, mbasis=None):
    """M-orthonormalize the columns of v against basis (two passes); drops dependent columns."""
    for _ in range(2):
        if basis is not None and basis.shape[1]:
            v = v - basis @ (mbasis.T @ v)
    g = v.T @ (m @ v)
    w, u = sla.eigh(0.5 * (g + g.T))
    keep = w > 1e-12 * max(w.max(), 1e-300)
    return v @ (u[:, keep] / np.sqrt(w[keep]))


def block_lanczos(K, M, count: int, seed: int = DEFAULT_SEED, tol: float = SOLVER_TOL,
                  maxiter: int | None = None, steps: int = 5):
    """Shift-invert block Lanczos for the smallest eigenpairs of K u = lambda M u.

    Builds block Krylov spaces of S = (K - sigma M)^{-1} M in the M-inner
    product with full reorthogonalization, then restarts from the lowest
    Ritz block. The block is wider than ``count`` so that every copy of a
    degenerate eigenvalue is captured, which single-vector Lanczos cannot
    guarantee.
    """
    k = sparse.csc_matrix(K, dtype=float)
    m = sparse.csc_matrix(M, dtype=float)
    n = k.shape[0]
    scale = abs(k.diagonal()).max() / m.diagonal().max()
    sigma = -1e-3 * max(scale, 1e-12) / n
    lu = spla.splu((k - sigma * m).tocsc())
    width = min(n, count + max(8, count // 2))
    cycles = 50 if maxiter is None else int(maxiter)
    x = np.random.default_rng(seed).standard_normal((n, width))
    res = None
    for _ in range(cycles):
        q = _m_orthonormalize(x, m)
        blocks = [q]
        for _ in range(steps - 1):
            w = lu.solve(m @ blocks[-1])
            basis = np.hstack(blocks)
            w = _m_orthonormalize(w, m, basis, m @ basis)
            if w.shape[1] == 0:
                break
            blocks.append(w)
        basis = np.hstack(blocks)
        kr = basis.T @ (k @ basis)
        mr = basis.T @ (m @ basis)
        theta, c = sla.eigh(0.5 * (kr + kr.T), 0.5 * (mr + mr.T))
        x = basis @ c[:, :width]
        vals, vecs = theta[:count], x[:, :count]
        res = _residuals(k, m, vals, vecs)
        if np.all(res <= tol * max(1.0, abs(vals).max())):
            return vals, vecs
    raise SolverError(f"block Lanczos did not converge in {cycles} cycles", residuals=res)


def solve_spectrum(K, M, count: int, seed: int = DEFAULT_SEED, tol: float = SOLVER_TOL,
                   maxiter: int | None = None, degree: int = 0) -> Spectrum:
    """Smallest ``count`` eigenpairs of K u = lambda M u.

    Dense LAPACK below DENSE_LIMIT unknowns, otherwise :func:`block_lanczos`
    with a starting block drawn from ``seed``.
    """
    n = K.shape[0]
    if K.shape != (n, n) or M.shape != (n, n):
        raise InputError("K and M must be square and of equal size")
    if not 1 <= count <= n:
        raise InputError(f"count must be in 1..{n}")
    _check_mass(M)
    if n <= DENSE_LIMIT:
        kd = K.toarray() if sparse.issparse(K) else np.asarray(K, dtype=float)
        md = M.toarray() if sparse.issparse(M) else np.asarray(M, dtype=float)
        vals, vecs = sla.eigh(kd, md, subset_by_index=[0, count - 1])
    else:
        vals, vecs = block_lanczos(K, M, count, seed=seed, tol=tol, maxiter=maxiter)
    vecs = _fix_signs(vecs)
    res = _residuals(K, M, vals, vecs)
    if np.any(res > tol * max(1.0, abs(vals).max())):
        raise SolverError(f"residual {res.max():.3e} above tolerance {tol:.1e}", residuals=res)
    vals = np.maximum.accumulate(vals)  # guard against rounding-level inversions
    return Spectrum(degree=degree, eigenvalues=vals, eigenforms=vecs, residuals=res)


def solve_degree(cx: WeightedComplex, p: int, count: int, seed: int = DEFAULT_SEED,
                 tol: float = SOLVER_TOL) -> Spectrum:
    k, m = hodge_laplacian(cx, p)
    return solve_spectrum(k, m, count, seed=seed, tol=tol, degree=p)


def sphere_multiplicity(m: int, l: int) -> int:
    """Dimension of degree-l spherical harmonics on S^m."""
    return comb(l + m, m) - (comb(l + m - 2, m) if l >= 2 else 0)


def analytic_sphere_spectrum(m: int, p: int, count: int, radius_sq: float | None = None) -> Spectrum:
    """Exact spectrum on S^m(r): lambda_l = l (l + m - 1) / r^2, default r^2 = m.

    Only p = 0 and p = m (all p on the circle) are available. The position
    vector is normal to the sphere, so the drift term vanishes and the
    weight is constant; the top-degree spectrum is the Hodge dual of the
    scalar one.
    """
    if m < 1 or not 0 <= p <= m:
        raise InputError(f"invalid (m, p) = ({m}, {p})")
    if p not in (0, m):
        raise OracleUnavailableError(f"no closed form for p={p} on S^{m}; use the discrete solver")
    r2 = float(m if radius_sq is None else radius_sq)
    if r2 <= 0:
        raise InputError("radius_sq must be positive")
    vals: list[float] = []
    l = 0
    while len(vals) < count:
        vals.extend([l * (l + m - 1) / r2] * sphere_multiplicity(m, l))
        l += 1
    return Spectrum(degree=p, eigenvalues=np.array(vals[:count]), source="analytic")


def circle_dispersion(n_nodes: int, count: int, radius: float = 1.0) -> np.ndarray:
    """Exact eigenvalues of the arc-length discrete circle Laplacian."""
    ks = [0]
    j = 1
    while len(ks) < count:
        ks += [j, j]
        j += 1
    ks = np.array(ks[:count], dtype=float)
    h = 2 * np.pi * radius / n_nodes
    return (2 * np.sin(np.pi * ks / n_nodes) / h) ** 2


def coordinate_eigenfunction_check(cx: WeightedComplex, backend: GeometryBackend) -> float:
    """max over coordinates of ||L x^A - x^A||_{M_0} / ||x^A||_{M_0}."""
    x = backend.positions
    m0 = cx.mass_diagonal(0)
    r = drift_apply(cx, x) - x
    num = np.sqrt(np.einsum("q,qa->a", m0, r * r))
    den = np.sqrt(np.einsum("q,qa->a", m0, x * x))
    live = den > 0
    return float((num[live] / den[live]).max())


@dataclass
class ConvergenceStudy:
    m: int
    p: int
    resolutions: list
    sizes: list
    errors: list  # max relative eigenvalue error per level over the nonzero window
    orders: list  # observed orders between consecutive levels
    count: int

    @property
    def mesh_tol(self) -> float:
        """Relative eigenvalue accuracy at the finest level."""
        return float(self.errors[-1])

    def to_dict(self):
        return {
            "m": self.m, "p": self.p, "resolutions": list(self.resolutions),
            "sizes": list(self.sizes), "errors": [float(e) for e in self.errors],
            "orders": [float(o) for o in self.orders], "count": self.count,
            "mesh_tol": self.mesh_tol,
        }


def convergence_study(m: int, p: int, resolutions, count: int,
                      seed: int = DEFAULT_SEED) -> ConvergenceStudy:
    """Refinement study of the discrete spectrum of S^m(sqrt(m)) against the oracle.

    ``resolutions`` are icosphere levels (m=2) or polygon node counts (m=1);
    mesh size halves between icosphere levels, so the observed order uses
    h ~ V^{-1/m}.
    """
    exact = analytic_sphere_spectrum(m, p, count).eigenvalues
    nz = exact > 1e-12
    errors, sizes = [], []
    for res in resolutions:
        backend = sphere_backend(m, samples=res)
        cx = build_complex(backend)
        spec = solve_degree(cx, p, count, seed=seed)
        errors.append(float(np.max(np.abs(spec.eigenvalues[nz] - exact[nz]) / exact[nz])))
        sizes.append(cx.size(0))
        log.info("convergence m=%d p=%d res=%s size=%d err=%.3e", m, p, res, sizes[-1], errors[-1])
    orders = []
    for i in range(1, len(errors)):
        hratio = (sizes[i] / sizes[i - 1]) ** (1.0 / m)
        orders.append(float(np.log(errors[i - 1] / errors[i]) / np.log(hratio)))
    return ConvergenceStudy(m, p, list(resolutions), sizes, errors, orders, count)
