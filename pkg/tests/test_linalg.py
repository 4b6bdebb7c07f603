import numpy as np
import pytest
import scipy.sparse as sp

from reactcoef.assembly import assemble_mass, assemble_stiffness
from reactcoef.linalg import ConvergenceError, as_spd_matrix, dot, matvec, solve_spd
from reactcoef import catalog


def random_spd(n, seed):
    r = np.random.default_rng(seed)
    B = r.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


def test_identity_and_diagonal():
    np.testing.assert_allclose(solve_spd(sp.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3], atol=1e-14)
    np.testing.assert_allclose(solve_spd(2 * sp.eye(2), [4.0, 6.0]), [2, 3], atol=1e-14)


def test_against_dense_elimination():
    A = random_spd(5, 7)
    b = np.random.default_rng(8).standard_normal(5)
    expected = np.linalg.solve(A, b)  # LU with partial pivoting
    x = solve_spd(sp.csr_matrix(A), b)
    np.testing.assert_allclose(x, expected, atol=1e-10)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_matvec_and_dot():
    x = np.arange(4.0)
    np.testing.assert_array_equal(matvec(sp.eye(4, format="csr"), x), x)
    assert dot(x, np.zeros(4)) == 0.0
    A = np.random.default_rng(9).standard_normal((6, 6))
    y = np.random.default_rng(10).standard_normal(6)
    np.testing.assert_allclose(matvec(sp.csr_matrix(A), y), A @ y, atol=1e-14)
    with pytest.raises(ValueError):
        matvec(sp.eye(3), np.ones(4))
    with pytest.raises(ValueError):
        dot(np.ones(3), np.ones(2))


def test_rejects_nonsymmetric():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
    with pytest.raises(ValueError, match="symmetric"):
        solve_spd(A, np.ones(2))
    with pytest.raises(ValueError):
        as_spd_matrix(A)


def test_reports_nonconvergence():
    A = sp.csr_matrix(random_spd(30, 3) + 1e3 * np.diag(np.arange(30.0)))
    with pytest.raises(ConvergenceError) as err:
        solve_spd(A, np.ones(30), rel_tol=1e-14, maxiter=2)
    assert err.value.residual > 1e-14


def test_deterministic():
    A = sp.csr_matrix(random_spd(20, 4))
    b = np.ones(20)
    assert np.array_equal(solve_spd(A, b), solve_spd(A, b))


@pytest.mark.parametrize("level", [2, 4, 8])
def test_residual_contract_and_positivity_on_assembled_systems(level, rng):
    from reactcoef.mesh import build_square_mesh
    m = build_square_mesh(level)
    K = assemble_stiffness(m, catalog.alpha, catalog.beta_true, 0.0)
    for A in (K, assemble_mass(m)):
        as_spd_matrix(A)
        for _ in range(100):
            x = rng.standard_normal(m.n_nodes)
            assert x @ (A @ x) > 0
        b = rng.standard_normal(m.n_nodes)
        x = solve_spd(A, b)
        assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)
