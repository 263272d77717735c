import numpy as np
import pytest
import scipy.sparse as sp

from limqr.solver import SolveStatus, SolverError, dense_solve, gmres_restarted


def test_dense_identity():
    b = np.array([1.5, -2.0, 3.25])
    x, res = dense_solve(np.eye(3), b)
    np.testing.assert_array_equal(x, b)
    assert res == 0.0


def test_dense_diagonal():
    x, _ = dense_solve([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0])
    np.testing.assert_allclose(x, [1.0, 2.0], rtol=0, atol=1e-15)


def test_dense_random_residual(rng):
    for _ in range(5):
        A = rng.standard_normal((25, 25)) + 10 * np.eye(25)
        assert np.linalg.cond(A) < 1e6
        b = rng.standard_normal(25)
        _, res = dense_solve(A, b)
        assert res < 1e-12


def test_dense_matrix_rhs():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    B = np.eye(2)
    X, _ = dense_solve(A, B)
    np.testing.assert_allclose(A @ X, B, atol=1e-15)


def test_dense_errors():
    with pytest.raises(np.linalg.LinAlgError):
        dense_solve(np.zeros((2, 2)), [1.0, 1.0])
    with pytest.raises(ValueError):
        dense_solve(np.ones((2, 3)), [1.0, 1.0])
    with pytest.raises(ValueError):
        dense_solve([[1.0, np.nan], [0.0, 1.0]], [1.0, 1.0])


def test_gmres_identity():
    x, rep = gmres_restarted(sp.identity(5, format="csr"), np.arange(1.0, 6.0))
    np.testing.assert_allclose(x, np.arange(1.0, 6.0))
    assert rep.converged and rep.iterations == 1


def test_gmres_two_by_two():
    x, rep = gmres_restarted([[4.0, 1.0], [1.0, 3.0]], [1.0, 2.0], tol=1e-12)
    assert rep.converged and rep.residual <= 1e-12
    np.testing.assert_allclose(x, [1 / 11, 7 / 11], atol=1e-12)


def test_gmres_zero_rhs():
    x, rep = gmres_restarted(sp.identity(3), np.zeros(3))
    assert rep.converged and not np.any(x)


@pytest.mark.parametrize("pre", ["jacobi", "ilu", "none"])
def test_gmres_matches_dense_and_history_monotone(rng, pre):
    n = 200
    A = sp.random(n, n, density=0.03, random_state=np.random.RandomState(4)) + sp.diags(np.full(n, 4.0))
    A = A.tocsr()
    b = rng.standard_normal(n)
    x, rep = gmres_restarted(A, b, restart=20, tol=1e-10, preconditioner=pre)
    assert rep.converged and rep.preconditioner == pre
    xd, _ = dense_solve(A.toarray(), b)
    assert np.linalg.norm(x - xd) / np.linalg.norm(xd) < 10 * 1e-10 * np.linalg.cond(A.toarray())
    assert all(b_ <= a_ for a_, b_ in zip(rep.history, rep.history[1:]))


def test_gmres_deterministic(rng):
    A = sp.random(80, 80, density=0.1, random_state=np.random.RandomState(1)) + sp.identity(80) * 3
    b = rng.standard_normal(80)
    x1, r1 = gmres_restarted(A, b, restart=5)
    x2, r2 = gmres_restarted(A, b, restart=5)
    np.testing.assert_array_equal(x1, x2)
    assert r1 == r2


def test_gmres_failure_codes():
    # a rotation has no Krylov progress for GMRES(1) from zero: stagnation
    n = 40
    P = sp.csr_matrix((np.ones(n), (np.arange(n), np.roll(np.arange(n), 1))), shape=(n, n))
    b = np.zeros(n)
    b[0] = 1.0
    _, rep = gmres_restarted(P, b, restart=1, preconditioner="none")
    assert not rep.converged and rep.status == SolveStatus.STAGNATED
    # slow but steady progress runs out of outer cycles instead
    A = sp.diags(np.linspace(1.0, 1e3, 200)).tocsr()
    _, rep = gmres_restarted(A, np.ones(200), restart=2, max_outer=3, preconditioner="none")
    assert rep.status == SolveStatus.MAX_OUTER and not rep.converged
    with pytest.raises(SolverError) as info:
        gmres_restarted(A, np.ones(200), restart=2, max_outer=3, preconditioner="none",
                        raise_on_failure=True)
    assert info.value.report.status == SolveStatus.MAX_OUTER


def test_gmres_validation():
    with pytest.raises(ValueError):
        gmres_restarted(sp.identity(3), np.ones(3), preconditioner="amg")
    with pytest.raises(ValueError):
        gmres_restarted(sp.csr_matrix([[0.0, 1.0], [1.0, 0.0]]), np.ones(2))


def test_pep5_iteration_bound():
    from limqr import bench
    res = bench.run("pep5", "lim-rbfqr", "uniform", 400, 25, 0.8, preconditioner="jacobi", ilu_fallback=False)
    assert res.report.converged and res.report.residual <= 1e-10
    assert res.report.iterations < 400
