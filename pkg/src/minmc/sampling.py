"""Parameter boxes, joint samples ``(theta_i, x_i)`` and pre-averaging."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import as_points


@dataclass(frozen=True)
class ParamSpace:
    """Product box with the uniform sampling measure and an evaluation grid."""

    bounds: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    grid: tuple[int, ...] | int = 100

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not bounds:
            raise ValueError("need at least one dimension")
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"interval [{lo}, {hi}] must have lower < upper")
        object.__setattr__(self, "bounds", bounds)
        g = self.grid
        g = (int(g),) * len(bounds) if np.isscalar(g) else tuple(int(n) for n in g)
        if len(g) != len(bounds) or min(g) < 1:
            raise ValueError("grid needs one positive point count per dimension")
        object.__setattr__(self, "grid", g)

    @property
    def dims(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.grid)]

    def grid_points(self) -> np.ndarray:
        """Evaluation grid as ``(n_points, dims)``; first axis varies slowest."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def contains(self, points) -> np.ndarray:
        P = as_points(points, self.dims)
        return np.all((P >= self.lower) & (P <= self.upper), axis=1)

    def to_dict(self) -> dict:
        return {"bounds": [list(b) for b in self.bounds], "grid": list(self.grid)}


def draw_thetas(space: ParamSpace, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. uniform draws on the box, shape ``(n, dims)``."""
    if n < 1:
        raise ValueError("need n >= 1")
    return rng.uniform(space.lower, space.upper, size=(n, space.dims))


@dataclass
class SampleSet:
    thetas: np.ndarray
    xs: np.ndarray
    m: int = 1
    seed: int | None = None
    stream_id: tuple[int, ...] = ()
    n_draws: int = field(default=0)

    def __post_init__(self):
        self.thetas = as_points(self.thetas)
        self.xs = np.asarray(self.xs, dtype=float).ravel()
        if self.thetas.shape[0] != self.xs.size or self.xs.size < 1:
            raise ValueError("thetas and xs must have the same positive length")
        if self.m < 1:
            raise ValueError("pre-averaging width must be >= 1")

    @property
    def n(self) -> int:
        return self.xs.size

    @property
    def dims(self) -> int:
        return self.thetas.shape[1]

    def to_csv(self, path) -> None:
        path = Path(path)
        header = [f"theta_{k + 1}" for k in range(self.dims)] + ["x", "m"]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for th, x in zip(self.thetas, self.xs):
                w.writerow([repr(float(t)) for t in th] + [repr(float(x)), self.m])

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        d = sum(h.startswith("theta_") for h in header)
        if header != [f"theta_{k + 1}" for k in range(d)] + ["x", "m"]:
            raise ValueError(f"unexpected sample header {header}")
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
        ms = {int(v) for v in data[:, -1]} if len(body) else {1}
        if len(ms) != 1:
            raise ValueError("mixed pre-averaging widths in one file")
        return cls(data[:, :d], data[:, d], m=ms.pop())


def build_samples(model, thetas, m: int, rng: np.random.Generator) -> SampleSet:
    """Average ``m`` conditionally i.i.d. payoffs at every parameter point."""
    if m < 1:
        raise ValueError("pre-averaging width must be >= 1")
    thetas = as_points(thetas, model.param_dim)
    ys = model.sample(thetas, rng, m)
    return SampleSet(thetas, ys.mean(axis=1), m=m, n_draws=int(ys.size))


def sample_study(model, space: ParamSpace, n: int, m: int, rng: np.random.Generator) -> SampleSet:
    """Thetas first, then payoffs row-major, from one stream."""
    thetas = draw_thetas(space, n, rng)
    return build_samples(model, thetas, m, rng)
