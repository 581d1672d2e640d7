"""Finite-dimensional checks of the operator identities behind the Yang-type bounds.

Everything here works on dense real symmetric matrices: the Ashbaugh-Hermi
commutator inequality, the Levitin-Parnovski sum rule and the orthogonal
recombination that makes the coupling matrix upper triangular.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import IdentityViolationError, InputError, PreconditionError, ShapeError

AH_TOL = 1e-10
LPT_TOL = 1e-10
TRI_TOL = 1e-10
# both sides of the sum rule are O(||L|| ||G||^2); below this fraction of
# that scale they are rounding noise and the residual is measured absolutely
LPT_FLOOR = 1e-4


def _square(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {a.shape}")
    return a


def _sym(a, name="matrix"):
    a = _square(a, name)
    return 0.5 * (a + a.T)


def commutator(A, B) -> np.ndarray:
    """[A, B] = AB - BA."""
    a, b = _square(A, "A"), _square(B, "B")
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return a @ b - b @ a


@dataclass
class OperatorPair:
    """Self-adjoint A with a family of symmetric perturbers B_k."""

    A: np.ndarray
    perturbers: list
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.A = _sym(self.A, "A")
        bs = [_sym(b, "perturber") for b in self.perturbers]
        if any(b.shape != self.A.shape for b in bs):
            raise ShapeError("perturbers must match the size of A")
        self.perturbers = bs
        self.eigenvalues, self.eigenvectors = sla.eigh(self.A)

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def rho_Lambda(self):
        """Per-eigenvector rho_i = sum <[A,B]u_i, B u_i> and Lambda_i = sum |[A,B]u_i|^2."""
        u = self.eigenvectors
        rho = np.zeros(self.size)
        lam = np.zeros(self.size)
        for b in self.perturbers:
            cu = commutator(self.A, b) @ u
            rho += np.einsum("ij,ij->j", cu, b @ u)
            lam += np.einsum("ij,ij->j", cu, cu)
        return rho, lam


def ah_check(pair: OperatorPair, k: int):
    """Ashbaugh-Hermi: sum (l_{k+1} - l_i)^2 rho_i <= sum (l_{k+1} - l_i) Lambda_i, i <= k.

    Returns (lhs, rhs, slack = rhs - lhs).
    """
    if not 1 <= k < pair.size:
        raise PreconditionError(f"k must satisfy 1 <= k < {pair.size}")
    lam = pair.eigenvalues
    rho, big = pair.rho_Lambda()
    diff = lam[k] - lam[:k]
    lhs = float(np.sum(diff ** 2 * rho[:k]))
    rhs = float(np.sum(diff * big[:k]))
    return lhs, rhs, rhs - lhs


def _clusters(vals, tol):
    groups = [[0]]
    for i in range(1, len(vals)):
        if vals[i] - vals[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _adapt_basis(u, g, groups):
    """Diagonalize G inside each eigencluster of L."""
    u = u.copy()
    for grp in groups:
        if len(grp) > 1:
            sub = u[:, grp]
            _, rot = sla.eigh(sub.T @ g @ sub)
            u[:, grp] = sub @ rot
    return u


def lpt_sides(L, G, j: int, cluster_tol: float | None = None):
    """Both sides of the Levitin-Parnovski sum rule for eigenvector j (1-based).

    lhs = sum over l_k != l_j of <[L,G]u_j,u_k>^2 / (l_k - l_j),
    rhs = -1/2 <[[L,G],G]u_j, u_j>.
    """
    l, g = _sym(L, "L"), _sym(G, "G")
    if l.shape != g.shape:
        raise ShapeError(f"shape mismatch {l.shape} vs {g.shape}")
    n = l.shape[0]
    if not 1 <= j <= n:
        raise PreconditionError(f"j must be in 1..{n}")
    vals, u = sla.eigh(l)
    scale = max(1.0, float(np.abs(vals).max()))
    tol = 1e-9 * scale if cluster_tol is None else cluster_tol
    groups = _clusters(vals, tol)
    c = commutator(l, g)
    coupling_tol = LPT_TOL * max(1.0, float(np.linalg.norm(c, 2)))
    jj = j - 1
    for attempt in range(2):
        cu = u.T @ c @ u
        grp = next(gr for gr in groups if jj in gr)
        inside = [k for k in grp if k != jj]
        if not inside or np.abs(cu[inside, jj]).max() <= coupling_tol:
            break
        if attempt:
            raise IdentityViolationError(
                f"coupling {np.abs(cu[inside, jj]).max():.3e} inside eigencluster of index {j}")
        u = _adapt_basis(u, g, groups)
    outside = np.array([k for k in range(n) if k not in grp], dtype=int)
    lhs = float(np.sum(cu[outside, jj] ** 2 / (vals[outside] - vals[jj]))) if len(outside) else 0.0
    rhs = float(-0.5 * u[:, jj] @ commutator(c, g) @ u[:, jj])
    floor = LPT_FLOOR * float(np.linalg.norm(l, 2)) * float(np.linalg.norm(g, 2)) ** 2
    return lhs, rhs, floor


def lpt_identity_residual(L, G, j: int) -> float:
    """Relative residual |lhs - rhs| / max(|lhs|, |rhs|) of the sum rule.

    The denominator is floored at 1e-4 ||L|| ||G||^2 so that (nearly) commuting
    pairs, where both sides are rounding noise, do not register as failures.
    """
    lhs, rhs, floor = lpt_sides(L, G, j)
    den = max(abs(lhs), abs(rhs), floor, np.finfo(float).tiny)
    return abs(lhs - rhs) / den


@dataclass
class Triangularization:
    rotation: np.ndarray  # O, with G'_A = sum_l O[A, l] G_l
    rotated: list
    coupling: np.ndarray  # P'[A, k] = <[L, G'_A] u_i, u_{i+k}>, upper triangular
    zero_rows: list
    max_violation: float


def coupling_matrix(L, Gs, i: int):
    l = _sym(L, "L")
    n = len(Gs)
    if n < 1:
        raise InputError("need at least one G")
    N = l.shape[0]
    if not 1 <= i or n > N - i:
        raise PreconditionError(f"need n <= N - i, got n={n}, N={N}, i={i}")
    _, u = sla.eigh(l)
    ui = u[:, i - 1]
    block = u[:, i:i + n]
    return np.array([block.T @ (commutator(l, _sym(g, "G")) @ ui) for g in Gs])


def triangularize_coupling(L, Gs, i: int) -> Triangularization:
    """Orthogonal recombination of the G's making the coupling matrix upper triangular.

    With P[A, k] = <[L, G_A] u_i, u_{i+k}> (k = 1..n) and P = QR, the
    rotation O = Q^T gives O P = R. Signs are fixed so that diag(O) >= 0,
    which makes O the identity when P is already triangular.
    Rows of R with a vanishing diagonal (rank deficiency) are reported in
    ``zero_rows`` rather than raised.
    """
    p = coupling_matrix(L, Gs, i)
    q, r = np.linalg.qr(p)
    s = np.where(np.diag(q) < 0, -1.0, 1.0)
    q, r = q * s, r * s[:, None]
    rot = q.T
    gs = [_sym(g, "G") for g in Gs]
    rotated = [sum(rot[a, b] * gs[b] for b in range(len(gs))) for a in range(len(gs))]
    scale = max(1.0, float(np.abs(p).max()))
    newp = coupling_matrix(L, rotated, i)
    viol = float(np.abs(np.tril(newp, -1)).max(initial=0.0)) / scale
    zero = [a for a in range(len(gs)) if abs(r[a, a]) <= TRI_TOL * scale]
    return Triangularization(rot, rotated, newp, zero, viol)


def random_symmetric(rng: np.random.Generator, n: int, degenerate: bool = False) -> np.ndarray:
    if degenerate:
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        vals = np.sort(rng.integers(-3, 4, size=n)).astype(float)
        return (q * vals) @ q.T
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def _trial(index, seed_seq, n_max, max_perturbers):
    rng = np.random.default_rng(seed_seq)
    n = int(rng.integers(2, n_max + 1))
    a = random_symmetric(rng, n, degenerate=bool(rng.random() < 0.2))
    bs = [random_symmetric(rng, n) for _ in range(int(rng.integers(1, max_perturbers + 1)))]
    pair = OperatorPair(a, bs)
    ah = 0.0
    for k in range(1, n):
        _, rhs, slack = ah_check(pair, k)
        ah = max(ah, -slack / (1.0 + abs(rhs)))
    lpt = 0.0
    try:
        for j in range(1, n + 1):
            lpt = max(lpt, lpt_identity_residual(a, bs[0], j))
    except IdentityViolationError:
        lpt = float("inf")
    ntri = min(len(bs), n - 1)
    i = int(rng.integers(1, n - ntri + 1))
    tri = triangularize_coupling(a, bs[:ntri], i).max_violation
    out = {"trial": index, "N": n, "ah_violation": max(ah, 0.0), "lpt_residual": lpt,
           "tri_violation": tri}
    failed = ah > AH_TOL or lpt > LPT_TOL or tri > TRI_TOL
    if failed:
        out["A"] = a.tolist()
        out["perturbers"] = [b.tolist() for b in bs]
    return out, failed


def verify_batch(trials: int, seed: int, n_max: int = 12, max_perturbers: int = 3,
                 threads: int = 1) -> dict:
    """Randomized verification over ``trials`` instances.

    Trial t draws from SeedSequence(seed).spawn(trials)[t], so results do not
    depend on the thread count. Returns {trials, max_violation, failures, ...}.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    if n_max < 2 or max_perturbers < 1:
        raise InputError("n_max must be >= 2 and max_perturbers >= 1")
    seqs = np.random.SeedSequence(seed).spawn(trials)
    args = [(t, s, n_max, max_perturbers) for t, s in enumerate(seqs)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: _trial(*a), args))
    else:
        results = [_trial(*a) for a in args]
    ah = max(r["ah_violation"] for r, _ in results)
    lpt = max(r["lpt_residual"] for r, _ in results)
    tri = max(r["tri_violation"] for r, _ in results)
    return {
        "trials": trials,
        "seed": seed,
        "max_violation": max(ah, lpt, tri),
        "ah_max_violation": ah,
        "lpt_max_residual": lpt,
        "triangularization_max_violation": tri,
        "failures": [r for r, bad in results if bad],
    }
