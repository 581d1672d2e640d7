import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhs.abstract import (
    OperatorPair,
    ah_check,
    commutator,
    coupling_matrix,
    lpt_identity_residual,
    lpt_sides,
    random_symmetric,
    triangularize_coupling,
    verify_batch,
)
from dhs.bounds import yang_sides
from dhs.complex import build_complex, hodge_laplacian
from dhs.errors import InputError, PreconditionError, ShapeError
from dhs.manifold import circle_backend


def test_commutator_examples(rng):
    a = random_symmetric(rng, 5)
    assert np.all(commutator(a, np.eye(5)) == 0)
    assert np.array_equal(commutator(np.diag([1.0, 2.0]), [[0.0, 1.0], [1.0, 0.0]]), [[0, -1], [1, 0]])
    c = commutator(a, random_symmetric(rng, 5))
    assert abs(np.trace(c)) < 1e-12
    assert np.allclose(c.T, -c)
    with pytest.raises(ShapeError):
        commutator(np.eye(2), np.eye(3))


def test_ah_commuting_perturbers(rng):
    a = random_symmetric(rng, 6)
    pair = OperatorPair(a, [a @ a, np.eye(6)])
    for k in range(1, 6):
        lhs, rhs, _ = ah_check(pair, k)
        assert abs(lhs) < 1e-10 and abs(rhs) < 1e-10
    with pytest.raises(PreconditionError):
        ah_check(pair, 6)


def test_ah_on_circle_laplacian():
    b = circle_backend(64)
    cx = build_complex(b)
    k, m = hodge_laplacian(cx, 0)
    s = 1 / np.sqrt(m.diagonal())
    a = (s[:, None] * k.toarray()) * s[None, :]
    theta = np.arctan2(b.positions[:, 1], b.positions[:, 0])
    lhs, rhs, slack = ah_check(OperatorPair(a, [np.diag(np.cos(theta))]), 1)
    # cos(theta) is a first eigenfunction, so k = 1 is an equality case
    assert lhs > 0 and slack >= -1e-10 * (1 + rhs)


def test_ah_matches_yang_with_coordinates():
    # rho_i = 1 and Lambda_i = 4 lambda_i + 2 (up to discretization) recover the p=0 Yang inequality
    b = circle_backend(64)
    cx = build_complex(b)
    k, m = hodge_laplacian(cx, 0)
    s = 1 / np.sqrt(m.diagonal())
    a = (s[:, None] * k.toarray()) * s[None, :]
    pair = OperatorPair(a, [np.diag(b.positions[:, 0]), np.diag(b.positions[:, 1])])
    lam = pair.eigenvalues
    for kk in (1, 3, 5):
        _, _, slack = ah_check(pair, kk)
        assert slack >= -1e-10
        lhs_y, rhs_y = yang_sides(lam, 4 * lam + 1, 1, kk)
        assert rhs_y - lhs_y >= -1e-3 * (rhs_y + lhs_y)


def test_ah_rotation_invariance(rng):
    a = random_symmetric(rng, 7)
    bs = [random_symmetric(rng, 7) for _ in range(3)]
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    mixed = [sum(q[i, j] * bs[j] for j in range(3)) for i in range(3)]
    for k in range(1, 7):
        x = ah_check(OperatorPair(a, bs), k)
        y = ah_check(OperatorPair(a, mixed), k)
        assert np.allclose(x, y, rtol=1e-10, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 10), seed=st.integers(0, 2 ** 32 - 1))
def test_ah_random(n, seed):
    rng = np.random.default_rng(seed)
    pair = OperatorPair(random_symmetric(rng, n), [random_symmetric(rng, n) for _ in range(2)])
    for k in range(1, n):
        _, rhs, slack = ah_check(pair, k)
        assert slack >= -1e-10 * (1 + abs(rhs))


def test_lpt_trivial_cases(rng):
    l = random_symmetric(rng, 6)
    for j in range(1, 7):
        assert lpt_identity_residual(l, np.eye(6), j) == 0.0
        assert lpt_identity_residual(l, l, j) == 0.0


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 12), seed=st.integers(0, 2 ** 32 - 1))
def test_lpt_random(n, seed):
    rng = np.random.default_rng(seed)
    l, g = random_symmetric(rng, n), random_symmetric(rng, n)
    for j in range(1, n + 1):
        assert lpt_identity_residual(l, g, j) <= 1e-10


def test_lpt_degenerate_spectrum(rng):
    l = random_symmetric(rng, 8, degenerate=True)
    g = random_symmetric(rng, 8)
    for j in range(1, 9):
        lhs, rhs, _ = lpt_sides(l, g, j)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_lpt_closed_form(rng):
    # both sides equal sum_k (lambda_k - lambda_j) G_kj^2 in the eigenbasis
    vals = np.array([0.0, 1.0, 3.0, 7.0])
    g = random_symmetric(rng, 4)
    lhs, rhs, _ = lpt_sides(np.diag(vals), g, 2)
    assert rhs == pytest.approx(np.sum((vals - vals[1]) * g[:, 1] ** 2), rel=1e-12)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_triangularization(rng):
    l = random_symmetric(rng, 6)
    gs = [random_symmetric(rng, 6) for _ in range(2)]
    res = triangularize_coupling(l, gs, 1)
    assert abs(coupling_matrix(l, res.rotated, 1)[1, 0]) < 1e-10
    assert np.allclose(res.rotation @ res.rotation.T, np.eye(2))
    assert np.array_equal(triangularize_coupling(l, gs[:1], 2).rotation, [[1.0]])
    again = triangularize_coupling(l, res.rotated, 1)
    assert np.allclose(np.abs(again.rotation), np.eye(2), atol=1e-10)
    assert np.allclose(np.linalg.eigvalsh(l), np.linalg.eigvalsh(l))
    with pytest.raises(PreconditionError):
        triangularize_coupling(l, gs, 5)


def test_triangularization_rank_deficient(rng):
    l = random_symmetric(rng, 6)
    g = random_symmetric(rng, 6)
    res = triangularize_coupling(l, [g, 2 * g], 1)
    assert res.zero_rows == [1]
    assert res.max_violation <= 1e-10


def test_triangularization_random_batch():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(3, 12))
        count = int(rng.integers(1, min(3, n - 1) + 1))
        i = int(rng.integers(1, n - count + 1))
        res = triangularize_coupling(random_symmetric(rng, n), [random_symmetric(rng, n) for _ in range(count)], i)
        assert res.max_violation <= 1e-10


def test_batch_deterministic_and_thread_independent():
    a = verify_batch(40, seed=11)
    b = verify_batch(40, seed=11, threads=3)
    assert a == b
    assert a["failures"] == [] and a["max_violation"] <= 1e-10
    with pytest.raises(InputError):
        verify_batch(0, seed=1)
