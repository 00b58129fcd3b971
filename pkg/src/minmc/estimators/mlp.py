"""Feed-forward tanh network trained with mini-batch Adam.

Forward and backward passes are written out by hand on one flat parameter
vector so the optimiser update is a handful of vectorised operations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..kernels import FeatureNodes
from ..numerics import RngStream
from ._base import validate_fit_input, validate_predict_input

log = logging.getLogger(__name__)

PENALTIES = ("none", "l2_feature", "rkhs01")


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    epsilon: float = 1e-8
    lam: float = 0.0
    penalty_mode: str = "none"
    penalty_nodes: int = 256
    shuffle_seed: int | None = None
    hidden: tuple[int, ...] = (200, 200)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.penalty_mode not in PENALTIES:
            raise ValueError(f"penalty_mode must be one of {PENALTIES}")


def _layer_shapes(n_in: int, hidden) -> list[tuple[int, int]]:
    sizes = [n_in, *hidden, 1]
    return list(zip(sizes[:-1], sizes[1:]))


def _views(w: np.ndarray, shapes):
    """Split a flat vector into ``[(W, b), ...]`` views."""
    out, pos = [], 0
    for a, b in shapes:
        W = w[pos:pos + a * b].reshape(a, b)
        pos += a * b
        out.append((W, w[pos:pos + b]))
        pos += b
    return out


def _n_params(shapes) -> int:
    return sum(a * b + b for a, b in shapes)


def forward(layers, X):
    """Return hidden activations and the network output."""
    acts = []
    h = X
    for W, b in layers[:-1]:
        h = np.tanh(h @ W + b)
        acts.append(h)
    W, b = layers[-1]
    return acts, (h @ W + b)[:, 0]


def backward(layers, grads, X, acts, dout):
    """Accumulate d(loss)/d(params) into the ``grads`` views given d(loss)/d(out)."""
    delta = dout[:, None]
    for k in range(len(layers) - 1, -1, -1):
        inp = X if k == 0 else acts[k - 1]
        gW, gb = grads[k]
        np.matmul(inp.T, delta, out=gW)
        np.sum(delta, axis=0, out=gb)
        if k:
            h = acts[k - 1]
            delta = (delta @ layers[k][0].T) * (1.0 - h * h)


def rkhs01_matrix(n_grid: int) -> np.ndarray:
    """``R`` with ``h^T R h / 2 = (h_0 + h_n)**2 / 2 + sum_k (h_{k+1} - h_k)**2 / (2 dt)``,
    the triangular-kernel norm of the piecewise-linear interpolant."""
    dt = 1.0 / (n_grid - 1)
    Dm = np.diff(np.eye(n_grid), axis=0)
    b = np.zeros(n_grid)
    b[[0, -1]] = 1.0
    return np.outer(b, b) + Dm.T @ Dm / dt


class MLPMinMC(RegressorMixin, BaseEstimator):
    """Tanh network fitted to ``mean((h(theta_i) - x_i)**2) + lam * penalty(h)``.

    Parameters
    ----------
    hidden : tuple of int, default=(200, 200)
    epochs, batch_size, learning_rate : training schedule (50, 32, 1e-4).
    beta_1, beta_2, epsilon : Adam constants.
    lam : float, default=0.0
    penalty : {"none", "l2_feature", "rkhs01"}
        ``l2_feature`` uses ``mean_p h(u_p)**2`` over ``penalty_nodes`` fixed
        standard-normal nodes; ``rkhs01`` the triangular-kernel norm of the
        network restricted to a ``penalty_grid``-point grid on [0, 1].
    penalty_batch : int, optional
        If set, each step uses an unbiased estimate of the penalty from this
        many random nodes (``l2_feature``) or grid intervals (``rkhs01``)
        instead of all of them.
    random_state : int or RngStream
        Source of the Xavier initialisation.
    shuffle_seed : int, optional
        Seed of the epoch permutations; derived from ``random_state`` if unset.

    Attributes
    ----------
    coefs_ : ndarray
        Flat parameter vector.
    loss_curve_ : list of float
        Mean data loss per epoch.
    """

    def __init__(
        self,
        hidden=(200, 200),
        epochs: int = 50,
        batch_size: int = 32,
        learning_rate: float = 1e-4,
        beta_1: float = 0.9,
        beta_2: float = 0.999,
        epsilon: float = 1e-8,
        lam: float = 0.0,
        penalty: str = "none",
        penalty_nodes: int = 256,
        penalty_grid: int = 201,
        penalty_batch: int | None = None,
        node_seed: int = 0,
        random_state=0,
        shuffle_seed=None,
    ):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta_1 = beta_1
        self.beta_2 = beta_2
        self.epsilon = epsilon
        self.lam = lam
        self.penalty = penalty
        self.penalty_nodes = penalty_nodes
        self.penalty_grid = penalty_grid
        self.penalty_batch = penalty_batch
        self.node_seed = node_seed
        self.random_state = random_state
        self.shuffle_seed = shuffle_seed

    @classmethod
    def from_config(cls, config: TrainConfig, random_state=0, **kw) -> "MLPMinMC":
        return cls(
            hidden=tuple(config.hidden),
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            beta_1=config.betas[0],
            beta_2=config.betas[1],
            epsilon=config.epsilon,
            lam=config.lam,
            penalty=config.penalty_mode,
            penalty_nodes=config.penalty_nodes,
            random_state=random_state,
            shuffle_seed=config.shuffle_seed,
            **kw,
        )

    # -- setup -------------------------------------------------------------

    def _streams(self):
        base = self.random_state
        base = base if isinstance(base, RngStream) else RngStream(int(base))
        shuffle = base.derive(1) if self.shuffle_seed is None else RngStream(int(self.shuffle_seed), (1,))
        return base.derive(0), shuffle, base.derive(2)

    def _init_params(self, shapes, rng: np.random.Generator) -> np.ndarray:
        w = np.zeros(_n_params(shapes))
        for W, _ in _views(w, shapes):
            fan_in, fan_out = W.shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            W[...] = rng.uniform(-limit, limit, W.shape)
        return w

    def _penalty_setup(self, n_features):
        """Fixed evaluation points and the map from outputs there to the
        penalty gradient (``None`` when unpenalised)."""
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if self.penalty == "none" or self.lam == 0:
            return None, None
        if self.penalty == "l2_feature":
            pts = FeatureNodes(self.penalty_nodes, n_features, seed=self.node_seed).nodes
            return pts, 2.0 / pts.shape[0] * np.eye(pts.shape[0])
        if n_features != 1:
            raise ValueError("the rkhs01 penalty needs one-dimensional inputs on [0, 1]")
        pts = np.linspace(0.0, 1.0, self.penalty_grid)[:, None]
        return pts, rkhs01_matrix(self.penalty_grid)

    def _penalty_sample(self, pts, rng):
        """Random sub-quadratic form whose expectation is the full penalty."""
        b = self.penalty_batch
        if self.penalty == "l2_feature":
            idx = rng.choice(pts.shape[0], min(b, pts.shape[0]), replace=False)
            return idx, 2.0 / idx.size * np.eye(idx.size)
        n = pts.shape[0]
        ks = rng.choice(n - 1, min(b, n - 1), replace=False)
        idx = np.concatenate([[0, n - 1], ks, ks + 1])
        dt = 1.0 / (n - 1)
        k = ks.size
        Dm = np.zeros((k, 2 + 2 * k))
        Dm[np.arange(k), 2 + k + np.arange(k)] = 1.0
        Dm[np.arange(k), 2 + np.arange(k)] = -1.0
        e = np.zeros(2 + 2 * k)
        e[:2] = 1.0
        return idx, np.outer(e, e) + (n - 1) / k * Dm.T @ Dm / dt

    # -- objective ---------------------------------------------------------

    def loss_and_grad(self, w, X, y):
        """Penalised loss and its gradient at the flat parameters ``w``."""
        X, y = validate_fit_input(X, y)
        shapes = _layer_shapes(X.shape[1], self.hidden)
        pts, R = self._penalty_setup(X.shape[1])
        grad = np.zeros_like(w)
        return self._loss_grad(w, grad, shapes, X, y, pts, R), grad

    def _loss_grad(self, w, grad, shapes, Xb, yb, pts, R):
        layers = _views(w, shapes)
        grads = _views(grad, shapes)
        nb = Xb.shape[0]
        Xin = Xb if pts is None else np.vstack([Xb, pts])
        acts, out = forward(layers, Xin)
        resid = out[:nb] - yb
        loss = float(resid @ resid) / nb
        dout = np.empty_like(out)
        dout[:nb] = (2.0 / nb) * resid
        if pts is not None:
            hp = out[nb:]
            Rh = R @ hp
            # both penalties are quadratic forms h^T R h / 2 in the outputs
            loss_pen = 0.5 * float(hp @ Rh)
            loss += self.lam * loss_pen
            dout[nb:] = self.lam * Rh
        backward(layers, grads, Xin, acts, dout)
        return loss

    # -- public API --------------------------------------------------------

    def fit(self, X, y):
        X, y = validate_fit_input(X, y)
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        init_stream, shuffle_stream, penalty_stream = self._streams()
        shapes = _layer_shapes(X.shape[1], self.hidden)
        w = self._init_params(shapes, init_stream.generator())
        pts, R = self._penalty_setup(X.shape[1])
        grad = np.zeros_like(w)
        m = np.zeros_like(w)
        v = np.zeros_like(w)
        tmp = np.empty_like(w)
        b1, b2, eps, lr = self.beta_1, self.beta_2, self.epsilon, self.learning_rate
        shuffle_rng = shuffle_stream.generator()
        penalty_rng = penalty_stream.generator()
        n = X.shape[0]
        t = 0
        curve = []
        # overflow is detected explicitly through the loss below
        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(self.epochs):
                perm = shuffle_rng.permutation(n)
                total = 0.0
                for start in range(0, n, self.batch_size):
                    idx = perm[start:start + self.batch_size]
                    if pts is not None and self.penalty_batch:
                        sub, R_sub = self._penalty_sample(pts, penalty_rng)
                        loss = self._loss_grad(w, grad, shapes, X[idx], y[idx], pts[sub], R_sub)
                    else:
                        loss = self._loss_grad(w, grad, shapes, X[idx], y[idx], pts, R)
                    if not np.isfinite(loss):
                        raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, step {t}")
                    total += loss * idx.size
                    t += 1
                    m *= b1
                    m += (1.0 - b1) * grad
                    v *= b2
                    np.multiply(grad, grad, out=tmp)
                    tmp *= 1.0 - b2
                    v += tmp
                    # w -= lr * m_hat / (sqrt(v_hat) + eps)
                    np.sqrt(v, out=tmp)
                    tmp *= 1.0 / np.sqrt(1.0 - b2**t)
                    tmp += eps
                    np.divide(m, tmp, out=tmp)
                    tmp *= lr / (1.0 - b1**t)
                    w -= tmp
                curve.append(total / n)
                log.debug("epoch %d loss %.6g", epoch, curve[-1])
        if not np.all(np.isfinite(w)):
            raise TrainingDivergedError("non-finite weights after training")
        self.coefs_ = w
        self.layer_shapes_ = shapes
        self.loss_curve_ = curve
        self.n_iter_ = t
        self.n_features_in_ = X.shape[1]
        return self

    def layers(self):
        check_is_fitted(self, "coefs_")
        return _views(self.coefs_, self.layer_shapes_)

    def predict(self, X):
        check_is_fitted(self, "coefs_")
        X = validate_predict_input(X, self.n_features_in_)
        return forward(self.layers(), X)[1]


def mlp_fit(samples, config: TrainConfig, rng=0) -> MLPMinMC:
    return MLPMinMC.from_config(config, random_state=rng).fit(samples.thetas, samples.xs)


def mlp_predict(fit: MLPMinMC, theta):
    out = fit.predict(theta)
    return float(out[0]) if np.ndim(theta) == 0 else out
