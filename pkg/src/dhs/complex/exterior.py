"""Pointwise exterior algebra on R^m with an orthonormal frame.

A p-form at a point is a dense, fully antisymmetric array of shape (m,)*p
holding the components phi_{i1...ip}. The pointwise inner product is
<phi, psi> = (1/p!) sum over all index tuples of phi * psi.
"""
from __future__ import annotations

from itertools import combinations, permutations
from math import factorial

import numpy as np

from ..errors import DegreeError, DimensionError, ShapeError
from ..manifold.backend import SymmetricTwoTensor

MAX_DIM = 8


def _perm_sign(perm):
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def _check(phi):
    phi = np.asarray(phi, dtype=float)
    if phi.ndim and len(set(phi.shape)) != 1:
        raise ShapeError("form components must have shape (m,)*p")
    if phi.ndim and phi.shape[0] > MAX_DIM:
        raise DimensionError(f"pointwise forms are supported for m <= {MAX_DIM}")
    return phi


def antisymmetrize(arr) -> np.ndarray:
    arr = _check(arr)
    p = arr.ndim
    if p < 2:
        return arr.copy()
    out = np.zeros_like(arr)
    for perm in permutations(range(p)):
        out += _perm_sign(perm) * np.transpose(arr, perm)
    return out / factorial(p)


def form_from_components(m: int, p: int, values) -> np.ndarray:
    """Build the antisymmetric array from strictly increasing components (i1 < ... < ip)."""
    idx = list(combinations(range(m), p))
    values = np.asarray(values, dtype=float)
    if values.shape != (len(idx),):
        raise ShapeError(f"expected {len(idx)} components for a {p}-form on R^{m}")
    out = np.zeros((m,) * p)
    for val, tup in zip(values, idx):
        for perm in permutations(range(p)):
            out[tuple(tup[k] for k in perm)] = _perm_sign(perm) * val
    return out


def random_form(m: int, p: int, rng: np.random.Generator) -> np.ndarray:
    n = len(list(combinations(range(m), p)))
    return form_from_components(m, p, rng.standard_normal(n))


def is_antisymmetric(phi, tol: float = 1e-12) -> bool:
    phi = _check(phi)
    scale = max(1.0, float(np.abs(phi).max(initial=0.0)))
    for a, b in combinations(range(phi.ndim), 2):
        if np.abs(phi + np.swapaxes(phi, a, b)).max() > tol * scale:
            return False
    return True


def form_inner(phi, psi) -> float:
    phi, psi = _check(phi), _check(psi)
    if phi.shape != psi.shape:
        raise ShapeError("forms of different degree or dimension")
    return float(np.sum(phi * psi)) / factorial(phi.ndim)


def form_norm_sq(phi) -> float:
    return form_inner(phi, phi)


def _tensor(t):
    return t.entries if isinstance(t, SymmetricTwoTensor) else SymmetricTwoTensor(t).entries


def wedge_contract(T, phi) -> np.ndarray:
    """Components of sum_ij T_ij omega^i ^ iota(e_j) phi.

    (T phi)_{i1..ip} = sum_k sum_j T_{j,ik} phi_{i1..j..ip}, j in slot k.
    """
    t = _tensor(T)
    phi = _check(phi)
    p = phi.ndim
    if p == 0:
        return np.zeros_like(phi)
    if phi.shape[0] != t.shape[0]:
        raise ShapeError("tensor and form live in different dimensions")
    out = np.zeros_like(phi)
    for k in range(p):
        # tensordot puts the new index i_k first
        out += np.moveaxis(np.tensordot(t, phi, axes=([0], [k])), 0, k)
    return out


def contraction_quadratic(T, phi) -> float:
    """(1/(p-1)!) sum T_{j i1} phi_{j i2..ip} phi_{i1 i2..ip}, the direct index sum."""
    t = _tensor(T)
    phi = _check(phi)
    p = phi.ndim
    if p == 0:
        return 0.0
    letters = "klmnopqrstuvw"[: p - 1]
    expr = f"ja,j{letters},a{letters}->"
    return float(np.einsum(expr, t, phi, phi)) / factorial(p - 1)


def contraction_bound_check(T, phi) -> float:
    """Slack p |T| |phi|^2 - <T phi, phi>, nonnegative for symmetric T."""
    t = SymmetricTwoTensor(_tensor(T))
    phi = _check(phi)
    p = phi.ndim
    if p == 0:
        return 0.0
    return p * t.frobenius_norm * form_norm_sq(phi) - form_inner(wedge_contract(t, phi), phi)


def curvature_operator_constant(m: int, p: int, sectional: float) -> float:
    """Eigenvalue of the Weitzenboeck term on p-forms for constant sectional curvature."""
    if not 0 <= p <= m:
        raise DegreeError(f"degree {p} outside 0..{m}")
    return sectional * p * (m - p)
