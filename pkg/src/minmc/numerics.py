"""Shared numerical plumbing: seeded streams, correlated normals, SPD solves,
quadrature and order statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid as _trapezoid


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a (jittered) Cholesky factorisation keeps failing."""


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Streams are derived by extending ``stream_id`` (a tuple of non-negative
    integers) and are backed by the counter-based Philox generator, so a
    stream depends only on its identifier and never on the order in which
    work is scheduled.

    >>> s = RngStream(7)
    >>> s.derive(3, 1).stream_id
    (3, 1)
    """

    seed: int
    stream_id: tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if any(i < 0 or i >= 2**64 for i in self.stream_id):
            raise ValueError("stream ids must be 64-bit unsigned integers")

    def derive(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def normal_pair_correlated(rng: np.random.Generator, rho: float, size=None):
    """Draw standard normals ``(z1, z2)`` with correlation ``rho``.

    ``z2 = rho * z1 + sqrt(1 - rho**2) * z_perp``; with ``rho = 1`` the two
    outputs are identical.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) > 1.0) or np.any(np.isnan(rho)):
        raise ValueError(f"correlation must lie in [-1, 1], got {rho}")
    z1 = rng.standard_normal(size)
    z_perp = rng.standard_normal(size)
    z2 = rho * z1 + np.sqrt(1.0 - rho * rho) * z_perp
    return z1, z2


def cholesky_jitter(A, max_escalations: int = 3):
    """Cholesky factor of ``A``, retrying with growing diagonal jitter.

    Returns ``(L, jitter)`` where ``jitter`` is the diagonal shift that was
    finally used (0.0 when the plain factorisation succeeded).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    try:
        return np.linalg.cholesky(A), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = np.trace(A) / n
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    jitter = 1e-12 * scale
    eye = np.eye(n)
    for _ in range(max_escalations + 1):
        try:
            return np.linalg.cholesky(A + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise SingularMatrixError(
        f"matrix is not positive definite even with diagonal jitter {jitter / 10:.3g}"
    )


def cho_solve(L, b):
    from scipy.linalg import solve_triangular

    y = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, y, lower=False, check_finite=False)


def solve_spd(A, b, return_jitter: bool = False):
    """Solve ``A x = b`` for symmetric positive (semi-)definite ``A``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b is {b.shape}")
    L, jitter = cholesky_jitter(A)
    x = cho_solve(L, b)
    return (x, jitter) if return_jitter else x


def quantile(values, p: float) -> float:
    """Linear-interpolation quantile (order statistic k sits at (k-1)/(n-1))."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    return float(np.quantile(v, p, method="linear"))


def trapezoid(f_values, grid) -> float:
    f = np.asarray(f_values, dtype=float)
    x = np.asarray(grid, dtype=float)
    if f.ndim != 1 or f.shape != x.shape:
        raise ValueError("values and grid must be 1-d arrays of equal length")
    if x.size < 2:
        raise ValueError("need at least two grid points")
    if np.any(np.diff(x) <= 0):
        raise ValueError("grid must be strictly increasing")
    return float(_trapezoid(f, x))


def sym_op_norm(S) -> float:
    """Operator norm of a symmetric matrix (largest absolute eigenvalue)."""
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + S.T)
    return float(np.max(np.abs(np.linalg.eigvalsh(S)))) if S.size else 0.0
