"""Reproducing kernels, random tanh feature maps and Gram assembly.

Four kernels are provided:

* ``TriangularKernel``: ``1 - |x - y|`` on ``[0, 1]``; its RKHS carries the
  inner product ``(f(0)+f(1))(g(0)+g(1))/2 + int f'g'/2``.
* ``LaplaceKernel``: ``c * exp(-|x - y|)`` on the real line (the n=1,
  alpha=2 Sobolev kernel).
* ``FilipovicKernel``: ``1 + int_0^{x^y} exp(-z) dz = 2 - exp(-min(x, y))``
  on ``[0, inf)`` (weight function ``w(z) = exp(z)``).
* ``FeatureMapKernel``: ``mean_j phi(x, u_j) phi(y, u_j)`` with
  ``phi(x, u) = tanh(x + u)``, the Monte Carlo version of ``E_R[phi_x phi_y]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .numerics import RngStream, trapezoid

LAPLACE_DEFAULT_SCALE = math.sqrt(math.pi / 2.0)


def as_points(points, dim: int | None = None) -> np.ndarray:
    """Coerce scalars, 1-d or 2-d input into an ``(n, d)`` float array."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 0:
        P = P.reshape(1, 1)
    elif P.ndim == 1:
        P = P[:, None] if dim in (None, 1) else P[None, :]
    elif P.ndim != 2:
        raise ValueError(f"points must be at most 2-d, got shape {P.shape}")
    if dim is not None and P.shape[1] != dim:
        raise ValueError(f"expected {dim}-dimensional points, got {P.shape[1]}")
    return P


class Kernel:
    """Base class. Subclasses implement ``_pairwise`` on validated arrays."""

    kind: str = ""
    dim: int = 1
    # sup of k(t, t) over the domain
    diag_bound: float = math.inf

    def _check_domain(self, P: np.ndarray) -> None:
        pass

    def _pairwise(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, X, Y=None) -> np.ndarray:
        X = as_points(X, self.dim)
        Y = X if Y is None else as_points(Y, self.dim)
        self._check_domain(X)
        self._check_domain(Y)
        return self._pairwise(X, Y)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class TriangularKernel(Kernel):
    kind = "triangular"
    diag_bound = 1.0

    def _check_domain(self, P):
        if np.any((P < 0.0) | (P > 1.0)) or np.any(~np.isfinite(P)):
            raise ValueError("triangular kernel is defined on [0, 1]")

    def _pairwise(self, X, Y):
        return 1.0 - np.abs(X[:, 0][:, None] - Y[:, 0][None, :])


@dataclass(frozen=True)
class LaplaceKernel(Kernel):
    scale: float = LAPLACE_DEFAULT_SCALE
    kind = "laplace"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("Laplace kernel scale must be positive")

    @property
    def diag_bound(self):
        return self.scale

    def _check_domain(self, P):
        if np.any(~np.isfinite(P)):
            raise ValueError("Laplace kernel needs finite points")

    def _pairwise(self, X, Y):
        return self.scale * np.exp(-np.abs(X[:, 0][:, None] - Y[:, 0][None, :]))

    def to_dict(self):
        return {"kind": self.kind, "scale": self.scale}


@dataclass(frozen=True)
class FilipovicKernel(Kernel):
    """Kernel of the weighted space with ``w(z) = exp(z)``."""

    kind = "filipovic"
    diag_bound = 2.0

    def _check_domain(self, P):
        if np.any(P < 0.0) or np.any(~np.isfinite(P)):
            raise ValueError("Filipovic kernel is defined on [0, inf)")

    def _pairwise(self, X, Y):
        m = np.minimum(X[:, 0][:, None], Y[:, 0][None, :])
        return 2.0 - np.exp(-m)


@dataclass(frozen=True)
class FeatureNodes:
    """Random nodes ``u_1..u_D`` drawn from the node law ``R``.

    ``distribution`` is ``"gaussian"`` (``N(loc, scale**2)`` per component,
    default standard normal) or ``"uniform"`` (per-component ``[low, high]``).
    For ``dim > 1`` the scalar feature is either the product of the
    per-component activations (``reduction="product"``) or the activation of
    the summed argument (``reduction="sum"``).
    ``activation="constant"`` replaces ``tanh`` by 1 and exists for tests.
    """

    n_nodes: int = 512
    dim: int = 1
    distribution: str = "gaussian"
    loc: tuple[float, ...] | float = 0.0
    scale: tuple[float, ...] | float = 1.0
    low: tuple[float, ...] | float = -1.0
    high: tuple[float, ...] | float = 1.0
    seed: int = 0
    reduction: str = "product"
    activation: str = "tanh"

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("need at least one node")
        if self.dim < 1:
            raise ValueError("node dimension must be positive")
        if self.distribution not in ("gaussian", "uniform"):
            raise ValueError(f"unknown node distribution {self.distribution!r}")
        if self.reduction not in ("product", "sum"):
            raise ValueError(f"unknown reduction {self.reduction!r}")
        if self.activation not in ("tanh", "constant"):
            raise ValueError(f"unknown activation {self.activation!r}")
        # lists coming from JSON are normalised to tuples to stay hashable
        for name in ("loc", "scale", "low", "high"):
            v = getattr(self, name)
            if isinstance(v, list):
                object.__setattr__(self, name, tuple(float(a) for a in v))

    def _param(self, name) -> np.ndarray:
        v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (self.dim,))
        return v.copy()

    @cached_property
    def nodes(self) -> np.ndarray:
        rng = RngStream(self.seed).generator()
        shape = (self.n_nodes, self.dim)
        if self.distribution == "gaussian":
            return self._param("loc") + self._param("scale") * rng.standard_normal(shape)
        low, high = self._param("low"), self._param("high")
        if np.any(high <= low):
            raise ValueError("uniform node box needs low < high")
        return rng.uniform(low, high, shape)

    def phi(self, points) -> np.ndarray:
        """Unscaled features ``phi(theta_i, u_j)``, shape ``(n, D)``."""
        P = as_points(points, self.dim)
        if self.activation == "constant":
            return np.ones((P.shape[0], self.n_nodes))
        U = self.nodes
        if self.dim == 1:
            return np.tanh(P[:, 0][:, None] + U[:, 0][None, :])
        if self.reduction == "sum":
            return np.tanh(P.sum(axis=1)[:, None] + U.sum(axis=1)[None, :])
        out = np.tanh(P[:, 0][:, None] + U[:, 0][None, :])
        for k in range(1, self.dim):
            out *= np.tanh(P[:, k][:, None] + U[:, k][None, :])
        return out

    def to_dict(self) -> dict:
        d = {
            "n_nodes": self.n_nodes,
            "dim": self.dim,
            "distribution": self.distribution,
            "seed": self.seed,
            "reduction": self.reduction,
            "activation": self.activation,
        }
        if self.distribution == "gaussian":
            d.update(loc=_listify(self.loc), scale=_listify(self.scale))
        else:
            d.update(low=_listify(self.low), high=_listify(self.high))
        return d


def _listify(v):
    return list(v) if isinstance(v, tuple) else v


def feature_matrix(nodes: FeatureNodes, points) -> np.ndarray:
    """``A[i, j] = phi(theta_i, u_j) / D`` so that ``D * A @ A.T`` is the
    feature-map Gram matrix."""
    return nodes.phi(points) / nodes.n_nodes


@dataclass(frozen=True)
class FeatureMapKernel(Kernel):
    nodes: FeatureNodes = field(default_factory=FeatureNodes)
    kind = "feature_map"
    diag_bound = 1.0

    @property
    def dim(self):
        return self.nodes.dim

    def _check_domain(self, P):
        if np.any(~np.isfinite(P)):
            raise ValueError("feature-map kernel needs finite points")

    def _pairwise(self, X, Y):
        D = self.nodes.n_nodes
        return (self.nodes.phi(X) @ self.nodes.phi(Y).T) / D

    def to_dict(self):
        return {"kind": self.kind, **self.nodes.to_dict()}


KERNELS = {
    "triangular": TriangularKernel,
    "laplace": LaplaceKernel,
    "filipovic": FilipovicKernel,
    "feature_map": FeatureMapKernel,
}


def kernel_from_dict(d: dict) -> Kernel:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel kind {kind!r}; expected one of {sorted(KERNELS)}")
    if kind == "feature_map":
        return FeatureMapKernel(FeatureNodes(**d))
    return KERNELS[kind](**d)


def eval_kernel(kernel: Kernel, x, y) -> float:
    return float(kernel(as_points(x, kernel.dim)[:1], as_points(y, kernel.dim)[:1])[0, 0])


def gram(kernel: Kernel, points) -> np.ndarray:
    """Gram matrix ``G[i, j] = k(p_i, p_j)``, exactly symmetric."""
    P = as_points(points, kernel.dim)
    if P.shape[0] < 1:
        raise ValueError("need at least one point")
    G = kernel(P, P)
    upper = np.triu(G)
    return upper + np.triu(G, 1).T


def rkhs_inner_triangular(f_values, g_values, grid) -> float:
    """Inner product of the triangular-kernel RKHS for sampled functions.

    Derivatives use central differences (one-sided at the endpoints), the
    integral the trapezoid rule.
    """
    f = np.asarray(f_values, dtype=float)
    g = np.asarray(g_values, dtype=float)
    x = np.asarray(grid, dtype=float)
    if x.size < 101:
        raise ValueError("grid must have at least 101 points")
    if f.shape != x.shape or g.shape != x.shape:
        raise ValueError("function samples must match the grid")
    h = np.diff(x)
    if abs(x[0]) > 1e-12 or abs(x[-1] - 1.0) > 1e-12 or np.ptp(h) > 1e-9 * h.mean():
        raise ValueError("grid must be uniform on [0, 1]")
    df = np.gradient(f, x)
    dg = np.gradient(g, x)
    boundary = 0.5 * (f[0] + f[-1]) * (g[0] + g[-1])
    return boundary + 0.5 * trapezoid(df * dg, x)
