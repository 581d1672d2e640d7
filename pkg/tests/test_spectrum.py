import json

import numpy as np
import pytest
from scipy import sparse
from scipy.spatial.transform import Rotation

from dhs.complex import build_complex, hodge_laplacian
from dhs.errors import InputError, OracleUnavailableError, SolverError
from dhs.manifold import circle_backend, icosphere, mesh_backend, sphere_backend
from dhs.manifold.meshes import EmbeddedMesh
from dhs.spectrum import (
    Spectrum,
    analytic_sphere_spectrum,
    block_lanczos,
    circle_dispersion,
    cluster_indices,
    convergence_study,
    solve_degree,
    solve_spectrum,
    sphere_multiplicity,
)


def test_circle_dispersion_matches_solver(circle64_complex):
    spec = solve_degree(circle64_complex, 0, 5)
    assert np.allclose(spec.eigenvalues, circle_dispersion(64, 5), atol=1e-10)
    assert spec.eigenvalues[1] == pytest.approx(1.0, rel=2e-3)
    assert spec.eigenvalues[3] == pytest.approx(4.0, rel=5e-3)


def test_circle_dispersion_closed_form():
    # independent: k^2 (sin(pi k/N) / (pi k/N))^2 on the unit circle
    n = 64
    for k in (1, 2, 5):
        x = np.pi * k / n
        assert circle_dispersion(n, 2 * k + 1)[2 * k] == pytest.approx(k * k * (np.sin(x) / x) ** 2, rel=1e-14)


def test_diagonal_problem():
    spec = solve_spectrum(sparse.diags([0.0, 1.0, 2.0]), sparse.identity(3), 3)
    assert np.allclose(spec.eigenvalues, [0, 1, 2])
    assert np.allclose(np.abs(spec.eigenforms), np.eye(3))


def test_weighted_orthonormality(s2_complex):
    spec = solve_degree(s2_complex, 0, 9)
    m = s2_complex.mass[0]
    g = spec.eigenforms.T @ (m @ spec.eigenforms)
    assert np.allclose(g, np.eye(9), atol=1e-10)
    assert spec.eigenvalues[0] >= -1e-10
    assert [len(c) for c in spec.clusters] == [1, 3, 5]


def test_block_lanczos_matches_dense(s2_complex):
    k, m = hodge_laplacian(s2_complex, 0)
    dense = solve_spectrum(k, m, 16).eigenvalues
    vals, vecs = block_lanczos(k, m, 16, seed=3)
    assert np.allclose(vals, dense, atol=1e-9)


def test_large_problem_uses_lanczos_and_captures_multiplicities():
    cx = build_complex(sphere_backend(2, samples=4))  # 2562 vertices
    spec = solve_degree(cx, 0, 16)
    # icosahedral symmetry splits the 7-fold l=3 level into 3 + 4 copies
    assert [len(c) for c in spec.clusters][:3] == [1, 3, 5]
    assert np.allclose(spec.eigenvalues[9:], 6.0, rtol=0.02)
    again = solve_degree(cx, 0, 16)
    assert np.array_equal(spec.eigenvalues, again.eigenvalues)


def test_solver_failure_reports_residuals():
    cx = build_complex(sphere_backend(2, samples=4))
    k, m = hodge_laplacian(cx, 0)
    with pytest.raises(SolverError) as err:
        block_lanczos(k, m, 16, maxiter=1, steps=2, tol=1e-14)
    assert err.value.residuals is not None


def test_indefinite_mass_rejected():
    with pytest.raises(InputError):
        solve_spectrum(sparse.identity(3), sparse.diags([1.0, -1.0, 1.0]), 2)
    with pytest.raises(InputError):
        solve_spectrum(np.eye(3), np.eye(3), 4)


def test_analytic_oracle():
    assert list(analytic_sphere_spectrum(2, 0, 9).eigenvalues) == [0, 1, 1, 1, 3, 3, 3, 3, 3]
    assert list(analytic_sphere_spectrum(1, 1, 5).eigenvalues) == [0, 1, 1, 4, 4]
    assert np.allclose(analytic_sphere_spectrum(3, 3, 5).eigenvalues, [0, 1, 1, 1, 1])
    with pytest.raises(OracleUnavailableError):
        analytic_sphere_spectrum(2, 1, 5)
    assert [sphere_multiplicity(3, l) for l in range(4)] == [1, 4, 9, 16]
    assert np.allclose(analytic_sphere_spectrum(2, 0, 4, radius_sq=1.0).eigenvalues, [0, 2, 2, 2])


def test_p0_and_top_degree_agree(s2_complex):
    a = solve_degree(s2_complex, 0, 9).eigenvalues
    b = solve_degree(s2_complex, 2, 9).eigenvalues
    assert np.allclose(a, b, rtol=0.05, atol=1e-9)


def test_rotation_invariance():
    mesh = icosphere(2, np.sqrt(2))
    rot = Rotation.from_euler("xyz", [0.3, -1.1, 2.0]).as_matrix()
    a = solve_degree(build_complex(mesh_backend(mesh)), 0, 9).eigenvalues
    b = solve_degree(build_complex(mesh_backend(EmbeddedMesh(mesh.vertices @ rot.T, mesh.cells))), 0, 9).eigenvalues
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_permutation_invariance(circle64_complex, rng):
    k, m = hodge_laplacian(circle64_complex, 0)
    perm = sparse.identity(64, format="csr")[rng.permutation(64)]
    a = solve_spectrum(k, m, 7).eigenvalues
    b = solve_spectrum(perm.T @ k @ perm, perm.T @ m @ perm, 7).eigenvalues
    assert np.allclose(a, b, atol=1e-12)


def test_spectrum_json_roundtrip():
    spec = Spectrum(degree=1, eigenvalues=[0.0, 1.0, 1.0 + 1e-9], residuals=np.array([0.0, 1e-12, 2e-12]))
    data = json.loads(spec.to_json())
    assert set(data) == {"degree", "eigenvalues", "residuals", "clusters"}
    assert data["clusters"] == [[0], [1, 2]]
    back = Spectrum.from_dict(data)
    assert np.array_equal(back.eigenvalues, spec.eigenvalues) and back.degree == 1
    with pytest.raises(InputError):
        Spectrum(degree=0, eigenvalues=[1.0, 0.0])


def test_cluster_indices():
    assert cluster_indices([0, 1, 1.0000001, 3], 1e-6) == [[0], [1, 2], [3]]


def test_convergence_study_circle():
    st = convergence_study(1, 0, [64, 128, 256], count=9)
    assert all(o >= 1.9 for o in st.orders)
    assert st.mesh_tol == st.errors[-1] < 1e-3
    assert set(st.to_dict()) >= {"errors", "orders", "mesh_tol"}


def test_convergence_study_s2_top_degree():
    st = convergence_study(2, 2, [2, 3, 4], count=9)
    assert all(o >= 1.5 for o in st.orders)


def test_seed_changes_nothing_but_rounding():
    cx = build_complex(circle_backend(3000))
    a = solve_degree(cx, 0, 5, seed=1).eigenvalues
    b = solve_degree(cx, 0, 5, seed=2).eigenvalues
    assert np.allclose(a, b, atol=1e-9)
