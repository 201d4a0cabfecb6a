"""Closed-form ridge regression with an implicit-differentiation VJP.

    w* = (Phi^T Phi + lam I)^{-1} Phi^T y

The Cholesky factor of ``A = Phi^T Phi + lam I`` is kept on the returned
:class:`RidgeSolution` so the backward pass reuses it instead of
refactorizing.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf


class SingularSystemError(np.linalg.LinAlgError):
    """The regularized Gram matrix is not numerically positive definite."""

    def __init__(self, pivot: int, lam: float):
        self.pivot = pivot
        self.lam = lam
        super().__init__(f"Cholesky failed at pivot {pivot} (lambda={lam:g})")


@dataclass(frozen=True)
class RidgeSolution:
    w: np.ndarray
    residual: np.ndarray  # Phi w - y
    lam: float
    factor: tuple = field(repr=False)  # (upper Cholesky factor, lower=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Apply ``A^{-1}`` using the stored factorization."""
        return cho_solve(self.factor, rhs, check_finite=False)


def _validate(Phi, y, lam):
    Phi = np.asarray(Phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if Phi.ndim != 2 or Phi.shape[0] < 1 or Phi.shape[1] < 1:
        raise ValueError(f"Phi must be a non-empty matrix, got shape {Phi.shape}")
    if y.shape != (Phi.shape[0],):
        raise ValueError(f"y must have shape ({Phi.shape[0]},), got {y.shape}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return Phi, y


def ridge_solve(Phi: np.ndarray, y: np.ndarray, lam: float) -> RidgeSolution:
    Phi, y = _validate(Phi, y, lam)
    A = Phi.T @ Phi
    A[np.diag_indices_from(A)] += lam
    U, info = dpotrf(A, lower=0, clean=1, overwrite_a=1)
    if info > 0:
        raise SingularSystemError(int(info), lam)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    factor = (U, False)
    w = cho_solve(factor, Phi.T @ y, check_finite=False)
    return RidgeSolution(w, Phi @ w - y, float(lam), factor)


def ridge_solve_retry(Phi, y, lam: float, retries: int = 3) -> RidgeSolution:
    """:func:`ridge_solve`, multiplying lambda by 10 on each failure."""
    for attempt in range(retries + 1):
        try:
            return ridge_solve(Phi, y, lam * 10.0 ** attempt)
        except SingularSystemError:
            if attempt == retries:
                raise


def ridge_vjp(Phi, y, sol: RidgeSolution, gbar):
    """Pull ``gbar = dL/dw`` back to ``(dL/dPhi, dL/dy)``.

    With ``u = A^{-1} gbar``:
        dL/dPhi = y u^T - Phi (u w^T + w u^T)
        dL/dy   = Phi u
    Direct dependence of the loss on Phi (through the residual) is not
    included.
    """
    Phi = np.asarray(Phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    u = sol.solve(np.asarray(gbar, dtype=np.float64))
    Pu = Phi @ u
    Pw = Phi @ sol.w
    grad_Phi = np.outer(y - Pw, u) - np.outer(Pu, sol.w)
    return grad_Phi, Pu


def fit_loss_grad(Phi, y, lam: float, sol: RidgeSolution = None):
    """Mean squared ridge residual and its total derivative w.r.t. Phi.

    The gradient accounts for the dependence of ``w*`` on ``Phi``. Pass
    ``sol`` to reuse an existing solve (and its factorization).
    """
    Phi, y = _validate(Phi, y, lam)
    if sol is None:
        sol = ridge_solve(Phi, y, lam)
    n = Phi.shape[0]
    r = sol.residual
    loss = float(r @ r) / n
    direct = (2.0 / n) * np.outer(r, sol.w)
    implicit, _ = ridge_vjp(Phi, y, sol, (2.0 / n) * (Phi.T @ r))
    return loss, direct + implicit
