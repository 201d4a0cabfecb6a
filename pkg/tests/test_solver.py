import numpy as np
import pytest

from vekua_cascade.solver import (SingularSystemError, fit_loss_grad, ridge_solve, ridge_solve_retry,
                                  ridge_vjp)

from helpers import central_fd, rel_err


def dense_ridge(Phi, y, lam):
    A = Phi.T @ Phi + lam * np.eye(Phi.shape[1])
    return np.linalg.inv(A) @ (Phi.T @ y)


def test_identity_design():
    sol = ridge_solve(np.eye(2), np.array([2.0, 4.0]), 0.5)
    np.testing.assert_allclose(sol.w, [4 / 3, 8 / 3], rtol=1e-14)
    np.testing.assert_allclose(sol.residual, [4 / 3 - 2, 8 / 3 - 4], rtol=1e-14)


def test_orthonormal_columns_small_lambda():
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((10, 4)))
    y = np.random.default_rng(1).standard_normal(10)
    sol = ridge_solve(Q, y, 1e-12)
    np.testing.assert_allclose(sol.w, Q.T @ y, rtol=1e-10)


def test_matches_dense_inverse():
    rng = np.random.default_rng(2)
    Phi, y = rng.standard_normal((50, 12)), rng.standard_normal(50)
    w = ridge_solve(Phi, y, 1e-5).w
    ref = dense_ridge(Phi, y, 1e-5)
    assert np.abs(w - ref).max() / np.abs(ref).max() <= 1e-9


def test_normal_equation_residual():
    rng = np.random.default_rng(3)
    Phi, y = rng.standard_normal((40, 10)), rng.standard_normal(40)
    sol = ridge_solve(Phi, y, 1e-3)
    lhs = Phi.T @ Phi @ sol.w + 1e-3 * sol.w
    rhs = Phi.T @ y
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) <= 1e-10


def test_invalid_inputs():
    with pytest.raises(ValueError):
        ridge_solve(np.eye(2), np.ones(2), 0.0)
    with pytest.raises(ValueError):
        ridge_solve(np.eye(2), np.ones(3), 1.0)


def test_singular_system_reports_pivot():
    Phi = np.full((2, 2), 1e10)
    with pytest.raises(SingularSystemError) as info:
        ridge_solve(Phi, np.ones(2), 1e-5)
    assert info.value.pivot == 2


def test_retry_gives_up_after_three_bumps():
    Phi = np.full((2, 2), 1e10)
    with pytest.raises(SingularSystemError) as info:
        ridge_solve_retry(Phi, np.ones(2), 1e-5)
    assert info.value.lam == pytest.approx(1e-2)


def test_retry_recovers_with_larger_lambda():
    # second column duplicates the first up to rounding; lam = 1e-6 underflows
    # against the 1e12-sized Gram entries but 1e-6 * 10^3 does not
    Phi = np.array([[1e6, 1e6], [1.0, 1.0]])
    try:
        ridge_solve(Phi, np.ones(2), 1e-6)
        pytest.skip("LAPACK factorized the un-jittered system")
    except SingularSystemError:
        pass
    sol = ridge_solve_retry(Phi, np.ones(2), 1e-6)
    assert sol.lam > 1e-6


def test_monotone_regularization():
    rng = np.random.default_rng(4)
    Phi, y = rng.standard_normal((30, 8)), rng.standard_normal(30)
    norms = [np.linalg.norm(ridge_solve(Phi, y, lam).w) for lam in np.logspace(-6, 2, 20)]
    assert all(a >= b for a, b in zip(norms, norms[1:]))


def test_vjp_zero_upstream():
    rng = np.random.default_rng(5)
    Phi, y = rng.standard_normal((8, 3)), rng.standard_normal(8)
    sol = ridge_solve(Phi, y, 0.1)
    gP, gy = ridge_vjp(Phi, y, sol, np.zeros(3))
    assert np.all(gP == 0) and np.all(gy == 0)


def test_vjp_identity_design():
    lam = 0.25
    gbar = np.array([1.0, -2.0, 0.5])
    y = np.array([0.3, 0.1, 2.0])
    sol = ridge_solve(np.eye(3), y, lam)
    _, gy = ridge_vjp(np.eye(3), y, sol, gbar)
    np.testing.assert_allclose(gy, gbar / (1 + lam), rtol=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_vjp_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    Phi, y, gbar = rng.standard_normal((20, 6)), rng.standard_normal(20), rng.standard_normal(6)
    lam = 1e-2
    sol = ridge_solve(Phi, y, lam)
    gP, gy = ridge_vjp(Phi, y, sol, gbar)
    assert rel_err(gP, central_fd(lambda P: gbar @ ridge_solve(P, y, lam).w, Phi)) <= 1e-6
    assert rel_err(gy, central_fd(lambda v: gbar @ ridge_solve(Phi, v, lam).w, y)) <= 1e-6


def test_loss_grad_scalar_case():
    # w = 1/2, r = -1/2, loss = 1/4; d loss / d phi = 2 r dr/dphi = -1/2
    loss, g = fit_loss_grad(np.array([[1.0]]), np.array([1.0]), 1.0)
    assert loss == pytest.approx(0.25, rel=1e-15)
    assert g[0, 0] == pytest.approx(-0.5, rel=1e-14)


def test_loss_grad_exact_fit():
    rng = np.random.default_rng(6)
    Phi = rng.standard_normal((30, 5))
    y = Phi @ rng.standard_normal(5)
    loss, g = fit_loss_grad(Phi, y, 1e-12)
    assert loss < 1e-20
    assert np.abs(g).max() < 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_loss_grad_matches_finite_differences(seed):
    rng = np.random.default_rng(10 + seed)
    Phi, y = rng.standard_normal((30, 8)), rng.standard_normal(30)
    lam = 1e-3
    loss, g = fit_loss_grad(Phi, y, lam)
    fd = central_fd(lambda P: fit_loss_grad(P, y, lam)[0], Phi)
    assert rel_err(g, fd) <= 1e-6


def test_loss_grad_reuses_solution():
    rng = np.random.default_rng(7)
    Phi, y = rng.standard_normal((12, 4)), rng.standard_normal(12)
    sol = ridge_solve(Phi, y, 1e-3)
    assert fit_loss_grad(Phi, y, 1e-3, sol=sol)[0] == fit_loss_grad(Phi, y, 1e-3)[0]
