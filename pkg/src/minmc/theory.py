"""Numerical checks of the convergence theory.

The appendix lemmas are dimension-free statements about bounded operators on
a Hilbert space, so verifying them on finite-dimensional instances
(:class:`FiniteModel`) is faithful. The rate and loss-limit checks run the
actual estimators on Black-Scholes studies with an analytic reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from .estimators._base import empirical_loss
from .estimators.krr import KernelRidgeMinMC
from .estimators.random_features import RandomFeatureRidge
from .kernels import FeatureNodes, Kernel
from .models import BlackScholesModel, BsSpec, bs_price
from .numerics import RngStream, solve_spd, sym_op_norm, trapezoid
from .sampling import ParamSpace, build_samples, draw_thetas, sample_study


@dataclass
class Verdict:
    check: str
    params: dict
    observed: float
    bound: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "check": self.check,
            "params": self.params,
            "observed": float(self.observed),
            "bound": float(self.bound),
            "pass": bool(self.passed),
        }
        if self.details:
            out["details"] = self.details
        return out


# -- appendix lemmas ----------------------------------------------------------


def scalar_f(lam: float, x):
    """``f(x) = lam sqrt(x) / (lam + x)``."""
    x = np.asarray(x, dtype=float)
    return lam * np.sqrt(x) / (lam + x)


def scalar_bound_check(lam: float, xs) -> bool:
    """True iff ``f(x) <= sqrt(lam)/2`` (to 1e-12) on every ``x`` in ``xs``."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0):
        raise ValueError("xs must be >= 0")
    return bool(np.all(scalar_f(lam, xs) <= math.sqrt(lam) / 2 + 1e-12))


@dataclass(frozen=True)
class FiniteModel:
    """``Q`` positive definite, ``a = Q h0``."""

    Q: np.ndarray
    a: np.ndarray
    h0: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T):
            raise ValueError("Q must be a symmetric square matrix")
        if np.linalg.eigvalsh(Q)[0] <= 0:
            raise ValueError("Q must be positive definite")
        if np.linalg.norm(Q @ self.h0 - self.a) > 1e-10 * max(1.0, np.linalg.norm(self.a)):
            raise ValueError("a must equal Q h0")

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def from_h0(cls, Q, h0) -> "FiniteModel":
        Q = np.asarray(Q, dtype=float)
        h0 = np.asarray(h0, dtype=float)
        return cls(Q, Q @ h0, h0)

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator, eig_range=(0.1, 10.0)) -> "FiniteModel":
        """Random SPD ``Q`` with eigenvalues uniform in ``eig_range``."""
        O, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        Q = (O * rng.uniform(*eig_range, dim)) @ O.T
        return cls.from_h0((Q + Q.T) / 2, rng.standard_normal(dim))


def ridge_shift_errors(model: FiniteModel, lams) -> np.ndarray:
    """``||h_lam - h0||_Q`` with ``h_lam = (Q + lam)^{-1} a``."""
    out = []
    for lam in lams:
        h = solve_spd(model.Q + lam * np.eye(model.dim), model.a)
        d = h - model.h0
        out.append(math.sqrt(max(float(d @ model.Q @ d), 0.0)))
    return np.array(out)


def ridge_shift_check(model: FiniteModel, lams) -> Verdict:
    """Check ``||h_lam - h0||_Q <= sqrt(lam) ||h0|| / 2`` at every ``lam`` and
    that the error shrinks monotonically as ``lam`` decreases."""
    lams = np.sort(np.asarray(lams, dtype=float))
    if lams.size == 0 or np.any(lams <= 0):
        raise ValueError("lams must be a non-empty vector of positive values")
    errs = ridge_shift_errors(model, lams)
    bounds = np.sqrt(lams) * np.linalg.norm(model.h0) / 2 + 1e-10
    violated = [float(l) for l, e, b in zip(lams, errs, bounds) if e > b]
    monotone = bool(np.all(np.diff(errs) >= -1e-12))
    converging = lams.size == 1 or errs[0] < errs[-1] or errs[-1] == 0
    slack = errs - bounds
    k = int(np.argmax(slack))
    return Verdict(
        "ridge_shift",
        {"dim": model.dim, "lambdas": [float(l) for l in lams]},
        float(errs[k]),
        float(bounds[k]),
        bool(not violated and monotone and converging),
        {"violations": violated, "monotone": monotone, "errors": errs.tolist()},
    )


def inverse_difference_check(Q1, Q2, lam: float) -> Verdict:
    """``||(Q1 + lam)^{-1} - (Q2 + lam)^{-1}||_op <= ||Q1 - Q2||_op / lam**2``."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    Q1 = np.atleast_2d(np.asarray(Q1, dtype=float))
    Q2 = np.atleast_2d(np.asarray(Q2, dtype=float))
    if Q1.shape != Q2.shape:
        raise ValueError("Q1 and Q2 must have the same shape")
    eye = np.eye(Q1.shape[0])
    lhs = sym_op_norm(np.linalg.inv(Q1 + lam * eye) - np.linalg.inv(Q2 + lam * eye))
    rhs = sym_op_norm(Q1 - Q2) / lam**2
    return Verdict("inverse_difference", {"dim": Q1.shape[0], "lambda": lam}, lhs, rhs, lhs <= rhs + 1e-10)


def random_psd(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    B = rng.standard_normal((dim, rank or dim))
    return B @ B.T / B.shape[1]


def _cos_features(thetas, dim: int) -> np.ndarray:
    # E[phi_j phi_k] = delta_jk / 2 (j, k >= 1), E[phi_0**2] = 1 under U[0, 1]
    return np.cos(np.pi * np.outer(thetas, np.arange(dim)))


def hilbert_mc_check(dim: int, N: int, reps: int, rng, matrix: bool = False, cov=None, z: float = 3.0) -> Verdict:
    """Ratio ``N E||mean_N - mu||**2 / E||b - mu||**2``, which equals 1.

    ``matrix=False`` draws Gaussian vectors with covariance ``cov`` (identity
    by default); ``matrix=True`` draws rank-one operators ``phi(t) phi(t)^T``
    for ``t ~ U[0, 1]`` and a cosine basis ``phi`` of length ``dim``, whose
    mean is known in closed form. Both norms are estimated from the same
    draws; the pass band is ``z`` delta-method standard errors.
    """
    if reps < 100:
        raise ValueError("reps must be >= 100")
    if dim < 1 or N < 1:
        raise ValueError("dim and N must be positive")
    if matrix and dim < 2:
        raise ValueError("the operator-valued check needs dim >= 2 (phi_0 is constant)")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    if matrix:
        mu = np.diag(np.r_[1.0, np.full(dim - 1, 0.5)]).ravel()
        t = gen.uniform(size=(reps, N))
        phi = _cos_features(t.ravel(), dim)
        dev = (phi[:, :, None] * phi[:, None, :]).reshape(reps, N, dim * dim) - mu
    else:
        L = np.eye(dim) if cov is None else np.linalg.cholesky(np.asarray(cov, dtype=float))
        dev = gen.standard_normal((reps, N, dim)) @ L.T
    num = N * np.sum(dev.mean(axis=1) ** 2, axis=1)  # per rep
    den = np.sum(dev * dev, axis=2).mean(axis=1)  # per rep
    ratio = float(num.mean() / den.mean())
    if N == 1:
        se = 0.0
    else:
        # delta method for a ratio of means
        c = np.cov(num, den)
        md = den.mean()
        var = (c[0, 0] - 2 * ratio * c[0, 1] + ratio**2 * c[1, 1]) / (md**2 * reps)
        se = math.sqrt(max(var, 0.0))
    band = z * se
    return Verdict(
        "hilbert_mc",
        {"dim": dim, "N": N, "reps": reps, "matrix": matrix},
        ratio,
        band,
        abs(ratio - 1.0) <= band + 1e-12,
        {"stderr": se, "z": z},
    )


def appendix_suite(n_instances: int = 100, seed: int = 0) -> list[Verdict]:
    """Run every appendix check on ``n_instances`` fuzzed instances each.

    The Monte Carlo identity is judged at a family-wise 3-sigma level
    (Bonferroni over the instances) so that a correct implementation passes
    the whole family with probability 0.997.
    """
    root = RngStream(seed, (7,))
    z_family = float(norm.isf(norm.sf(3.0) / n_instances))
    out: list[Verdict] = []
    for i in range(n_instances):
        g = root.derive(0, i).generator()
        lam = float(10 ** g.uniform(-6, 2))
        xs = np.r_[0.0, lam, 10 ** g.uniform(-8, 8, 200)]
        ok = scalar_bound_check(lam, xs)
        peak = float(scalar_f(lam, lam))
        out.append(Verdict("scalar_bound", {"lambda": lam, "n_x": xs.size},
                           float(scalar_f(lam, xs).max()), math.sqrt(lam) / 2, ok, {"at_lambda": peak}))

        g = root.derive(1, i).generator()
        model = FiniteModel.random(int(g.integers(1, 51)), g)
        out.append(ridge_shift_check(model, 10 ** g.uniform(-6, 0, 20)))

        g = root.derive(2, i).generator()
        dim = int(g.integers(1, 31))
        Q1 = random_psd(dim, g, int(g.integers(1, dim + 1)))
        Q2 = random_psd(dim, g, int(g.integers(1, dim + 1)))
        out.append(inverse_difference_check(Q1, Q2, float(g.choice([0.01, 0.1, 1.0]))))

        g = root.derive(3, i).generator()
        matrix = bool(i % 2)
        dim = int(g.integers(1 + matrix, 11))
        N = int(g.integers(1, 30))
        if matrix:
            v = hilbert_mc_check(dim, N, 400, g, matrix=True, z=z_family)
        else:
            A = g.standard_normal((dim, dim))
            v = hilbert_mc_check(dim, N, 400, g, cov=A @ A.T + 0.1 * np.eye(dim), z=z_family)
        out.append(v)
    return out


# -- rate and loss limit --------------------------------------------------------


def _require_bs(model):
    if not isinstance(model, BlackScholesModel):
        raise NotImplementedError("an analytic reference price is only available for Black-Scholes models")
    return model


def l2_error(fit, model: BlackScholesModel, space: ParamSpace, n_quad: int = 201) -> float:
    """``||h_fit - h0||`` in ``L2`` of the uniform law on the (1-d) box, by
    trapezoid quadrature."""
    (lo, hi), = space.bounds
    grid = np.linspace(lo, hi, n_quad)
    err = fit.predict(grid[:, None]) - model.price(grid[:, None])
    return math.sqrt(trapezoid(err * err, grid) / (hi - lo))


def default_estimator(kind: str, lam: float, nodes: FeatureNodes | None = None, kernel: Kernel | None = None):
    if kind == "rf_ridge":
        return RandomFeatureRidge(nodes or FeatureNodes(), lam)
    if kind == "krr":
        return KernelRidgeMinMC(kernel, lam)
    raise ValueError(f"unsupported estimator {kind!r}")


@dataclass
class RateReport:
    Ns: list[int]
    lambdas: list[float]
    errors: list[float]
    slope: float
    per_rep: list[list[float]]
    high_variance: bool = False

    def __post_init__(self):
        if len(self.Ns) != len(self.errors):
            raise ValueError("one error per sample size")

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))

    def to_dict(self) -> dict:
        return {
            "Ns": list(self.Ns),
            "lambdas": list(self.lambdas),
            "errors": list(self.errors),
            "slope": self.slope,
            "strictly_decreasing": self.strictly_decreasing,
            "high_variance": self.high_variance,
        }


def convergence_rate(
    model=None,
    Ns=(1_000, 3_000, 10_000, 30_000, 100_000),
    reps: int = 20,
    rng: RngStream = RngStream(0),
    estimator: str = "rf_ridge",
    space: ParamSpace = ParamSpace(),
    nodes: FeatureNodes | None = None,
    kernel: Kernel | None = None,
    exponent: float = 0.2,
) -> RateReport:
    """Mean ``L2`` error of ``h_{N, lam_N}`` with ``lam_N = N**-exponent``
    and the least-squares slope of ``log e_N`` against ``log N``."""
    model = _require_bs(model or BlackScholesModel())
    Ns = [int(n) for n in Ns]
    if reps < 1 or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("Ns must be increasing and reps >= 1")
    lams = [float(n) ** -exponent for n in Ns]
    per_rep = []
    for i, (n, lam) in enumerate(zip(Ns, lams)):
        row = []
        for r in range(reps):
            s = sample_study(model, space, n, 1, rng.derive(i, r).generator())
            fit = default_estimator(estimator, lam, nodes, kernel).fit(s.thetas, s.xs)
            row.append(l2_error(fit, model, space))
        per_rep.append(row)
    errors = [float(np.mean(r)) for r in per_rep]
    slope = float(np.polyfit(np.log(Ns), np.log(errors), 1)[0]) if len(Ns) > 1 else float("nan")
    return RateReport(Ns, lams, errors, slope, per_rep, high_variance=reps == 1)


def bs_second_moment(spec: BsSpec, sigma):
    """``E[(S_T - K)_+**2]`` (discounted) under Black-Scholes."""
    sigma = np.asarray(sigma, dtype=float)
    x, K, r, T = spec.spot, spec.strike, spec.rate, spec.maturity
    v = sigma * math.sqrt(T)
    d2 = (math.log(x / K) + (r - 0.5 * sigma**2) * T) / v
    fwd = x * math.exp(r * T)
    m = fwd**2 * np.exp(v * v) * ndtr(d2 + 2 * v) - 2 * K * fwd * ndtr(d2 + v) + K * K * ndtr(d2)
    return math.exp(-2 * r * T) * m


def expected_conditional_variance_quad(model: BlackScholesModel, space: ParamSpace, n_quad: int = 2001) -> float:
    """``E[Var(X | Theta)]`` for uniform ``Theta`` by quadrature of the
    closed-form conditional moments."""
    model = _require_bs(model)
    (lo, hi), = space.bounds
    grid = np.linspace(lo, hi, n_quad)
    sig = model.spec.sigma(grid)
    var = bs_second_moment(model.spec, sig) - bs_price(model.spec, sig) ** 2
    return trapezoid(var, grid) / (hi - lo)


def expected_conditional_variance_mc(model, space: ParamSpace, rng: RngStream, outer: int = 1_000, inner: int = 10_000) -> float:
    """Nested Monte Carlo ``E[Var(X | Theta)]``: ``outer`` parameter draws,
    ``inner`` payoffs each, unbiased conditional variances."""
    g = rng.generator()
    thetas = draw_thetas(space, outer, g)
    total = 0.0
    for start in range(0, outer, 50):
        ys = model.sample(thetas[start:start + 50], g, inner)
        total += ys.var(axis=1, ddof=1).sum()
    return total / outer


@dataclass
class LossLimitReport:
    Ns: list[int]
    lambdas: list[float]
    losses: list[float]
    target: float
    m: int = 1

    @property
    def rel_errors(self) -> list[float]:
        return [abs(l - self.target) / self.target for l in self.losses]

    def to_dict(self) -> dict:
        return {"Ns": self.Ns, "lambdas": self.lambdas, "losses": self.losses,
                "target": self.target, "m": self.m, "rel_errors": self.rel_errors}


def loss_limit(
    model=None,
    Ns=(1_000, 10_000, 100_000),
    rng: RngStream = RngStream(0),
    estimator: str = "rf_ridge",
    space: ParamSpace = ParamSpace(),
    m: int = 1,
    target: float | None = None,
    nodes: FeatureNodes | None = None,
    kernel: Kernel | None = None,
    exponent: float = 0.2,
) -> LossLimitReport:
    """Empirical loss of ``h_{N, lam_N}`` next to ``E[Var(X | Theta)] / m``.

    ``target`` defaults to the nested Monte Carlo oracle on a stream derived
    from ``rng``.
    """
    model = model or BlackScholesModel()
    if target is None:
        target = expected_conditional_variance_mc(model, space, rng.derive(99))
    target = target / m
    Ns = [int(n) for n in Ns]
    lams = [float(n) ** -exponent for n in Ns]
    losses = []
    for i, (n, lam) in enumerate(zip(Ns, lams)):
        g = rng.derive(i).generator()
        s = build_samples(model, draw_thetas(space, n, g), m, g)
        fit = default_estimator(estimator, lam, nodes, kernel).fit(s.thetas, s.xs)
        losses.append(empirical_loss(fit, s))
    return LossLimitReport(Ns, lams, losses, float(target), m)
