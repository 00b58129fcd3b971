"""Ridge regression in the random tanh feature space.

The hypothesis ``f(theta) = (1/D) sum_j g_j tanh(theta + u_j)`` is the image
of the coefficient vector ``g`` viewed as an element of ``L2(R)``, whose norm
is estimated by ``(1/D) ||g||**2``. Minimising

    (1/N) ||A g - x||**2 + (lam / D) ||g||**2,   A = feature_matrix(nodes, thetas)

gives ``(A^T A / N + lam / D) g = A^T x / N``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_is_fitted

from ..kernels import FeatureNodes, feature_matrix
from ..numerics import solve_spd
from ._base import validate_fit_input, validate_predict_input


def normal_equations(nodes: FeatureNodes, X, y, chunk_size: int = 20_000):
    """Return ``(A^T A / N, A^T y / N)`` accumulated over row blocks."""
    D = nodes.n_nodes
    AtA = np.zeros((D, D))
    Aty = np.zeros(D)
    for start in range(0, X.shape[0], chunk_size):
        A = feature_matrix(nodes, X[start:start + chunk_size])
        AtA += A.T @ A
        Aty += A.T @ y[start:start + chunk_size]
    n = X.shape[0]
    return AtA / n, Aty / n


class RandomFeatureRidge(RegressorMixin, BaseEstimator):
    """Primal ridge in the ``L2(R)`` pull-back of the feature-map RKHS.

    Parameters
    ----------
    nodes : FeatureNodes, default=FeatureNodes()
    lam : float, default=1e-3
    chunk_size : int, default=20000
        Rows of the feature matrix materialised at once.

    Attributes
    ----------
    coef_ : ndarray of shape (n_nodes,)
        The weights ``g``.
    norm_sq_ : float
        ``(1/D) sum_j g_j**2``.
    jitter_ : float
        Non-zero when the normal matrix needed a diagonal shift (typically
        ``lam=0``).
    """

    def __init__(self, nodes: FeatureNodes | None = None, lam: float = 1e-3, chunk_size: int = 20_000):
        self.nodes = nodes
        self.lam = lam
        self.chunk_size = chunk_size

    def _nodes(self) -> FeatureNodes:
        return FeatureNodes() if self.nodes is None else self.nodes

    def _finish(self, AtA, Aty, n_features):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        nodes = self._nodes()
        D = nodes.n_nodes
        g, jitter = solve_spd(AtA + (self.lam / D) * np.eye(D), Aty, return_jitter=True)
        self.coef_ = g
        self.jitter_ = jitter
        self.norm_sq_ = float(g @ g / D)
        self.n_features_in_ = n_features
        return self

    def fit(self, X, y):
        X, y = validate_fit_input(X, y)
        nodes = self._nodes()
        if X.shape[1] != nodes.dim:
            raise ValueError(f"X has {X.shape[1]} features, nodes are {nodes.dim}-dimensional")
        AtA, Aty = normal_equations(nodes, X, y, self.chunk_size)
        return self._finish(AtA, Aty, X.shape[1])

    def fit_path(self, X, y, lams) -> list["RandomFeatureRidge"]:
        """Fit one clone per ridge level, sharing the normal equations."""
        X, y = validate_fit_input(X, y)
        nodes = self._nodes()
        AtA, Aty = normal_equations(nodes, X, y, self.chunk_size)
        return [clone(self).set_params(lam=lam)._finish(AtA, Aty, X.shape[1]) for lam in lams]

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_predict_input(X, self.n_features_in_)
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], self.chunk_size):
            block = X[start:start + self.chunk_size]
            out[start:start + block.shape[0]] = feature_matrix(self._nodes(), block) @ self.coef_
        return out


def rf_ridge_fit(nodes: FeatureNodes, samples, lam: float) -> RandomFeatureRidge:
    return RandomFeatureRidge(nodes, lam).fit(samples.thetas, samples.xs)
