"""Exact kernel ridge regression on the span of the sampled kernel sections."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..kernels import Kernel, TriangularKernel, gram
from ..numerics import SingularMatrixError, solve_spd
from ._base import validate_fit_input, validate_predict_input


class KernelRidgeMinMC(RegressorMixin, BaseEstimator):
    """Minimiser of ``mean((h(theta_i) - x_i)**2) + lam * ||h||_H**2``.

    By the representer theorem ``h = sum_i alpha_i k(theta_i, .)`` with
    ``(G + N lam I) alpha = x``.

    Parameters
    ----------
    kernel : Kernel, default=TriangularKernel()
        Reproducing kernel of the hypothesis space.
    lam : float, default=1e-3
        Ridge level. ``lam=0`` is allowed; the solve then falls back to
        diagonal jitter and raises :class:`SingularMatrixError` if the
        jittered solution misses the system by more than 1e-8 (relative).

    Attributes
    ----------
    anchors_ : ndarray of shape (n_samples, n_features)
    dual_coef_ : ndarray of shape (n_samples,)
    jitter_ : float
        Diagonal shift used by the Cholesky fallback (0.0 if none).
    """

    def __init__(self, kernel: Kernel | None = None, lam: float = 1e-3):
        self.kernel = kernel
        self.lam = lam

    def _kernel(self) -> Kernel:
        return TriangularKernel() if self.kernel is None else self.kernel

    def fit(self, X, y):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        X, y = validate_fit_input(X, y)
        kern = self._kernel()
        n = X.shape[0]
        G = gram(kern, X)
        A = G + n * self.lam * np.eye(n)
        try:
            alpha, jitter = solve_spd(A, y, return_jitter=True)
        except SingularMatrixError as exc:
            raise SingularMatrixError(
                f"{exc}; the kernel system is singular at lam={self.lam}, add a ridge term"
            ) from None
        if jitter:
            # the jittered factorisation always succeeds on a PSD matrix; make
            # sure it still solves the system that was asked for
            resid = np.linalg.norm(A @ alpha - y) / max(np.linalg.norm(y), np.finfo(float).tiny)
            if resid > 1e-8:
                raise SingularMatrixError(
                    f"relative residual {resid:.2e} after diagonal jitter; the kernel system is "
                    f"singular at lam={self.lam}, add a ridge term"
                )
        self.anchors_ = X
        self.dual_coef_ = alpha
        self.jitter_ = jitter
        self.n_features_in_ = X.shape[1]
        self.gram_ = G
        return self

    def predict(self, X):
        check_is_fitted(self, "dual_coef_")
        X = validate_predict_input(X, self.n_features_in_)
        return self._kernel()(X, self.anchors_) @ self.dual_coef_

    def rkhs_norm_sq(self) -> float:
        check_is_fitted(self, "dual_coef_")
        a = self.dual_coef_
        return float(a @ self.gram_ @ a)

    def objective(self, X, y, alpha=None) -> float:
        """Penalised empirical risk of ``sum_i alpha_i k(anchor_i, .)``
        (defaults to the fitted coefficients)."""
        check_is_fitted(self, "dual_coef_")
        a = self.dual_coef_ if alpha is None else np.asarray(alpha, dtype=float)
        X, y = validate_fit_input(X, y)
        h = self._kernel()(X, self.anchors_) @ a
        return float(np.mean((h - y) ** 2) + self.lam * a @ self.gram_ @ a)


def krr_fit(kernel: Kernel, samples, lam: float) -> KernelRidgeMinMC:
    return KernelRidgeMinMC(kernel, lam).fit(samples.thetas, samples.xs)


def krr_predict(fit: KernelRidgeMinMC, theta):
    out = fit.predict(theta)
    return float(out[0]) if np.ndim(theta) == 0 else out
