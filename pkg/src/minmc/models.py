"""Conditional payoff samplers and reference prices.

A model maps a batch of parameter points ``thetas`` of shape ``(n, d)`` to
payoff draws of shape ``(n, m)`` (``m`` conditionally i.i.d. draws per
point, generated row-major).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtr

from .kernels import as_points
from .numerics import normal_pair_correlated

VOL_MAPS = ("affine01", "direct")


def european_call(s, strike):
    """Call payoff ``max(s - K, 0)``."""
    return np.maximum(np.asarray(s, dtype=float) - strike, 0.0)


@dataclass(frozen=True)
class BsSpec:
    spot: float = 100.0
    strike: float = 100.0
    rate: float = 0.0
    maturity: float = 1.0
    vol_map: str = "affine01"

    def __post_init__(self):
        if self.spot < 0 or self.strike <= 0 or self.maturity <= 0:
            raise ValueError("spot must be >= 0, strike and maturity > 0")
        if self.vol_map not in VOL_MAPS:
            raise ValueError(f"vol_map must be one of {VOL_MAPS}, got {self.vol_map!r}")

    def sigma(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.vol_map == "affine01":
            if np.any((theta < 0) | (theta > 1)):
                raise ValueError("affine01 parameters must lie in [0, 1]")
            return (1.0 + theta) / 10.0
        if np.any(theta <= 0):
            raise ValueError("direct volatility parameters must be positive")
        return theta


def bs_price(spec: BsSpec, sigma, intrinsic_at_zero: bool = False):
    """Black-Scholes call price ``x N(d1) - K exp(-rT) N(d1 - sigma sqrt(T))``.

    ``sigma <= 0`` raises unless ``intrinsic_at_zero`` is set, in which case
    ``sigma == 0`` maps to the discounted intrinsic value of the forward.
    """
    sigma = np.asarray(sigma, dtype=float)
    x, K, r, T = spec.spot, spec.strike, spec.rate, spec.maturity
    zero = sigma == 0
    if np.any(sigma < 0) or (np.any(zero) and not intrinsic_at_zero):
        raise ValueError("volatility must be positive")
    if x == 0:
        return np.zeros_like(sigma) if sigma.ndim else 0.0
    s = np.where(zero, 1.0, sigma)
    vol = s * math.sqrt(T)
    d1 = (math.log(x / K) + (r + 0.5 * s * s) * T) / vol
    price = x * ndtr(d1) - K * math.exp(-r * T) * ndtr(d1 - vol)
    if np.any(zero):
        price = np.where(zero, max(x - K * math.exp(-r * T), 0.0), price)
    return price if price.ndim else float(price)


@dataclass(frozen=True)
class BlackScholesModel:
    """Call payoff ``exp(-rT) (x exp(Z_T) - K)_+`` with
    ``Z_T ~ N((r - sigma(theta)**2 / 2) T, sigma(theta)**2 T)``."""

    spec: BsSpec = field(default_factory=BsSpec)
    param_dim = 1

    def sample(self, thetas, rng: np.random.Generator, m: int = 1) -> np.ndarray:
        th = as_points(thetas, 1)[:, 0]
        sig = self.spec.sigma(th)[:, None]
        T, r = self.spec.maturity, self.spec.rate
        z = rng.standard_normal((th.size, m))
        log_growth = (r - 0.5 * sig * sig) * T + sig * math.sqrt(T) * z
        s_T = self.spec.spot * np.exp(log_growth)
        return math.exp(-r * T) * european_call(s_T, self.spec.strike)

    def price(self, thetas) -> np.ndarray:
        th = as_points(thetas, 1)[:, 0]
        return np.asarray(bs_price(self.spec, self.spec.sigma(th)), dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "black_scholes", **asdict(self.spec)}


def bs_payoff_sample(spec: BsSpec, theta, rng: np.random.Generator, size=None):
    """Payoff draw(s) at a single parameter value."""
    n = 1 if size is None else int(size)
    out = BlackScholesModel(spec).sample(np.full(1, float(theta)), rng, n)[0]
    return float(out[0]) if size is None else out


@dataclass(frozen=True)
class HestonSpec:
    spot: float = 100.0
    strike: float = 100.0
    maturity: float = 1.0 / 12.0
    kappa: float = 2.0
    theta_var: float = 0.04
    sigma_vol: float = 0.2
    rho: float = -0.5
    v0: float | None = None  # None: start at theta_var
    rate: float = 0.0
    steps: int = 64

    def __post_init__(self):
        if self.spot <= 0 or self.strike <= 0 or self.maturity <= 0:
            raise ValueError("spot, strike and maturity must be positive")
        if self.kappa <= 0 or self.theta_var <= 0 or self.sigma_vol < 0:
            raise ValueError("need kappa > 0, theta_var > 0, sigma_vol >= 0")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if self.v0 is not None and self.v0 <= 0:
            raise ValueError("v0 must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


HESTON_PARAMS = ("kappa", "theta_var", "sigma_vol", "rho", "v0")


def heston_terminal(spec: HestonSpec, rng: np.random.Generator, size: int = 1, **overrides):
    """Terminal prices ``S_T`` by full-truncation Euler (log-Euler for ``S``).

    ``overrides`` may replace any of the model parameters by per-path arrays
    of length ``size``. With ``v0`` unset the variance starts at
    ``theta_var``.
    """
    unknown = set(overrides) - set(HESTON_PARAMS)
    if unknown:
        raise ValueError(f"unknown Heston parameters {sorted(unknown)}")

    def param(name):
        v = overrides.get(name, getattr(spec, name))
        return np.broadcast_to(np.asarray(v, dtype=float), (size,))

    kappa, theta_v, sig = param("kappa"), param("theta_var"), param("sigma_vol")
    rho = overrides.get("rho", spec.rho)
    if "v0" in overrides or spec.v0 is not None:
        v = param("v0").copy()
    else:
        v = theta_v.copy()
    dt = spec.maturity / spec.steps
    sqdt = math.sqrt(dt)
    log_s = np.full(size, math.log(spec.spot))
    for _ in range(spec.steps):
        z_s, z_v = normal_pair_correlated(rng, rho, size)
        v_pos = np.maximum(v, 0.0)
        sq_v = np.sqrt(v_pos)
        log_s += (spec.rate - 0.5 * v_pos) * dt + sq_v * sqdt * z_s
        v = v + kappa * (theta_v - v_pos) * dt + sig * sq_v * sqdt * z_v
    return np.exp(log_s)


@dataclass(frozen=True)
class HestonModel:
    """European call under Heston with ``params`` taken from the parameter
    point, in order (e.g. ``("kappa", "theta_var")``)."""

    spec: HestonSpec = field(default_factory=HestonSpec)
    params: tuple[str, ...] = ("kappa", "theta_var")
    chunk: int = 200_000

    def __post_init__(self):
        if isinstance(self.params, list):
            object.__setattr__(self, "params", tuple(self.params))
        bad = set(self.params) - set(HESTON_PARAMS)
        if bad or not self.params:
            raise ValueError(f"params must be a non-empty subset of {HESTON_PARAMS}")

    @property
    def param_dim(self):
        return len(self.params)

    def sample(self, thetas, rng: np.random.Generator, m: int = 1) -> np.ndarray:
        th = as_points(thetas, self.param_dim)
        rows = np.repeat(th, m, axis=0)
        out = np.empty(rows.shape[0])
        # paths are simulated in blocks; the block layout is fixed so results
        # do not depend on anything but (rng, thetas, m)
        for start in range(0, rows.shape[0], self.chunk):
            block = rows[start:start + self.chunk]
            over = {name: block[:, k] for k, name in enumerate(self.params)}
            s_T = heston_terminal(self.spec, rng, block.shape[0], **over)
            disc = math.exp(-self.spec.rate * self.spec.maturity)
            out[start:start + block.shape[0]] = disc * european_call(s_T, self.spec.strike)
        return out.reshape(th.shape[0], m)

    def price(self, thetas):
        raise NotImplementedError("Heston prices are benchmarked by Monte Carlo")

    def to_dict(self) -> dict:
        return {"kind": "heston", "params": list(self.params), **asdict(self.spec)}


def model_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "black_scholes":
        return BlackScholesModel(BsSpec(**d))
    if kind == "heston":
        params = tuple(d.pop("params", ("kappa", "theta_var")))
        chunk = d.pop("chunk", 200_000)
        return HestonModel(HestonSpec(**d), params, chunk)
    raise ValueError(f"unknown model kind {kind!r}; expected 'black_scholes' or 'heston'")


def has_analytic_price(model) -> bool:
    return isinstance(model, BlackScholesModel)
