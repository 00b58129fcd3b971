"""Config-driven case studies: benchmarks, repeated fits, grid errors and
CSV/JSON exports."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .estimators import KernelRidgeMinMC, MLPMinMC, RandomFeatureRidge
from .kernels import FeatureNodes, as_points, kernel_from_dict
from .models import has_analytic_price, model_from_dict
from .numerics import RngStream, quantile
from .sampling import ParamSpace, sample_study

log = logging.getLogger(__name__)

ESTIMATORS = ("krr", "rf_ridge", "mlp")


# -- benchmarks -----------------------------------------------------------------


@dataclass
class BenchmarkGrid:
    points: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray | None = None

    def __post_init__(self):
        self.points = as_points(self.points)
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.points.shape[0]:
            raise ValueError("one benchmark value per grid point")

    def to_csv(self, path) -> None:
        d = self.points.shape[1]
        se = self.stderrs if self.stderrs is not None else np.full(self.values.size, np.nan)
        rows = [[*p, v, s] for p, v, s in zip(self.points, self.values, se)]
        _write_csv(path, [f"theta_{k + 1}" for k in range(d)] + ["price", "stderr"], rows)


def mc_benchmark_grid(model, grid, n_sims: int, rng: RngStream, chunk: int = 100_000) -> BenchmarkGrid:
    """Per-point mean of ``n_sims`` payoffs; point ``j`` uses stream ``rng.derive(j)``."""
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    pts = as_points(grid, model.param_dim)
    vals = np.empty(pts.shape[0])
    ses = np.empty(pts.shape[0])
    for j, p in enumerate(pts):
        g = rng.derive(j).generator()
        s = s2 = 0.0
        for start in range(0, n_sims, chunk):
            y = model.sample(p[None, :], g, min(chunk, n_sims - start))[0]
            s += y.sum()
            s2 += (y * y).sum()
        mean = s / n_sims
        var = max(s2 / n_sims - mean * mean, 0.0) * n_sims / max(n_sims - 1, 1)
        vals[j] = mean
        ses[j] = math.sqrt(var / n_sims) if n_sims > 1 else math.inf
    return BenchmarkGrid(pts, vals, ses)


def analytic_benchmark(model, grid) -> BenchmarkGrid:
    pts = as_points(grid, model.param_dim)
    return BenchmarkGrid(pts, model.price(pts), np.zeros(pts.shape[0]))


def grid_mse(surface, benchmark: BenchmarkGrid, values=None) -> float:
    """Mean squared gap between ``surface.predict`` (or precomputed
    ``values``) and the benchmark on its grid."""
    pred = surface.predict(benchmark.points) if values is None else np.asarray(values, dtype=float).ravel()
    if pred.shape != benchmark.values.shape:
        raise ValueError(f"grid mismatch: {pred.shape} predictions for {benchmark.values.shape} benchmark points")
    d = pred - benchmark.values
    return float(d @ d / d.size)


def mc_baseline_mse(model, grid, per_point_samples: int, rng, benchmark: BenchmarkGrid | None = None,
                    chunk: int = 10_000_000) -> float:
    """Grid MSE of plain per-point Monte Carlo with ``per_point_samples`` draws."""
    if per_point_samples < 1:
        raise ValueError("per_point_samples must be >= 1")
    g = rng.generator() if isinstance(rng, RngStream) else rng
    bench = benchmark or analytic_benchmark(model, grid)
    pts = bench.points
    est = np.empty(pts.shape[0])
    # batch points so that at most ~chunk draws are held at once
    per = max(1, chunk // per_point_samples)
    for start in range(0, pts.shape[0], per):
        block = pts[start:start + per]
        if per_point_samples <= chunk:
            est[start:start + block.shape[0]] = model.sample(block, g, per_point_samples).mean(axis=1)
        else:
            for k, p in enumerate(block):
                tot = 0.0
                for s in range(0, per_point_samples, chunk):
                    tot += model.sample(p[None, :], g, min(chunk, per_point_samples - s)).sum()
                est[start + k] = tot / per_point_samples
    return grid_mse(None, bench, est)


# -- configuration ------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Case-study description.

    ``M`` is a list of pre-averaging widths. With more than one width,
    ``budget`` fixes ``M * N`` and ``N`` is derived per width; otherwise
    either ``N`` or ``budget`` may be given. ``estimator`` is
    ``{"kind": "rf_ridge", "nodes": {...}}``, ``{"kind": "krr", "kernel":
    {...}}`` or ``{"kind": "mlp", ...training parameters}``. ``benchmark``
    is ``{"kind": "analytic"}`` or ``{"kind": "mc", "n_sims": n}``.
    """

    model: dict
    space: dict = field(default_factory=lambda: {"bounds": [[0.0, 1.0]], "grid": 100})
    estimator: dict = field(default_factory=lambda: {"kind": "rf_ridge"})
    lambdas: list = field(default_factory=lambda: [0.01])
    N: int | None = None
    M: list = field(default_factory=lambda: [1])
    budget: int | None = None
    reps: int = 1
    benchmark: dict = field(default_factory=lambda: {"kind": "analytic"})
    seed: int = 0
    share_samples: bool = False
    curve_points: int = 0
    heatmap: bool = False
    out_dir: str | None = None

    def __post_init__(self):
        if isinstance(self.M, int):
            self.M = [self.M]
        self.M = [int(m) for m in self.M]
        self.lambdas = [float(l) for l in self.lambdas]
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.M or min(self.M) < 1:
            raise ValueError("pre-averaging widths must be >= 1")
        if not self.lambdas or min(self.lambdas) < 0:
            raise ValueError("lambdas must be a non-empty list of values >= 0")
        if self.estimator.get("kind") not in ESTIMATORS:
            raise ValueError(f"estimator kind must be one of {ESTIMATORS}")
        if self.benchmark.get("kind") not in ("analytic", "mc"):
            raise ValueError("benchmark kind must be 'analytic' or 'mc'")
        if self.N is None and self.budget is None:
            raise ValueError("give N or budget")
        if len(self.M) > 1 and self.budget is None:
            raise ValueError("an M-sweep needs a fixed budget")
        for m in self.M:
            if self.budget is not None and (self.budget % m or self.budget < m):
                raise ValueError(f"budget {self.budget} is not a positive multiple of M={m}")
            if self.N is not None and self.budget is not None and self.N * m != self.budget:
                raise ValueError("N * M must equal budget")

    def n_for(self, m: int) -> int:
        return self.budget // m if self.budget is not None else int(self.N)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def build_model(self):
        return model_from_dict(self.model)

    def build_space(self) -> ParamSpace:
        return ParamSpace(tuple(tuple(b) for b in self.space["bounds"]), self.space.get("grid", 100))


def make_estimator(spec: dict, lam: float, random_state=0, dims: int = 1):
    """Estimator from its config entry; ``dims`` is the default node dimension."""
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "rf_ridge":
        nodes = FeatureNodes(**{"dim": dims, **spec.pop("nodes", {})})
        return RandomFeatureRidge(nodes, lam, **spec)
    if kind == "krr":
        kernel = kernel_from_dict(spec.pop("kernel", {"kind": "triangular"}))
        return KernelRidgeMinMC(kernel, lam, **spec)
    if kind == "mlp":
        if "hidden" in spec:
            spec["hidden"] = tuple(spec["hidden"])
        return MLPMinMC(lam=lam, random_state=random_state, **spec)
    raise ValueError(f"unknown estimator kind {kind!r}")


# -- case study -----------------------------------------------------------------


@dataclass
class ExperimentReport:
    config: dict
    rows: list = field(default_factory=list)  # (lambda, m, rep, mse, error)
    benchmark: dict | None = None
    curve: list = field(default_factory=list)  # (lambda, m, *theta, fit, ref)
    heatmap: list = field(default_factory=list)  # (lambda, m, t1, t2, fit, bench)

    def cells(self) -> list[tuple[float, int]]:
        lams = self.config.get("lambdas") or list(dict.fromkeys(r[0] for r in self.rows))
        ms = self.config.get("M") or list(dict.fromkeys(r[1] for r in self.rows))
        return [(l, m) for l in lams for m in ms]

    def mses(self, lam: float, m: int) -> np.ndarray:
        return np.array([r[3] for r in self.rows if r[0] == lam and r[1] == m and r[4] is None], dtype=float)

    def summary(self) -> list[dict]:
        out = []
        for lam, m in self.cells():
            v = self.mses(lam, m)
            q = [quantile(v, p) if v.size else math.nan for p in (0.25, 0.5, 0.75)]
            n_rows = sum(1 for r in self.rows if r[0] == lam and r[1] == m)
            out.append({"lambda": lam, "m": m, "q25": q[0], "median": q[1], "q75": q[2],
                        "complete": n_rows > 0 and v.size == n_rows})
        return out

    def median(self, lam: float, m: int) -> float:
        v = self.mses(lam, m)
        return quantile(v, 0.5) if v.size else math.nan

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "rows": [{"lambda": r[0], "m": r[1], "rep": r[2], "mse": _num(r[3]), "error": r[4]} for r in self.rows],
            "summary": [{k: _num(v) for k, v in s.items()} for s in self.summary()],
            "benchmark": self.benchmark,
            "curve": [[_num(x) for x in c] for c in self.curve],
            "heatmap": [[_num(x) for x in c] for c in self.heatmap],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        rows = [(r["lambda"], r["m"], r["rep"], _unnum(r["mse"]), r["error"]) for r in d["rows"]]
        return cls(d["config"], rows, d.get("benchmark"),
                   [[_unnum(x) for x in c] for c in d.get("curve", [])],
                   [[_unnum(x) for x in c] for c in d.get("heatmap", [])])


def _num(x):
    if isinstance(x, (bool, str)) or x is None:
        return x
    x = float(x)
    return None if math.isnan(x) else x


def _unnum(x):
    return math.nan if x is None else x


def _one_cell(cfg: ExperimentConfig, model, space, bench, mi, rep, lam_indices, root):
    """Fit every requested lambda for one (M, rep); returns rows and fits."""
    m = cfg.M[mi]
    n = cfg.n_for(m)
    kind = cfg.estimator["kind"]
    results = []
    groups = [lam_indices] if cfg.share_samples else [[li] for li in lam_indices]
    for group in groups:
        key = (mi, rep) if cfg.share_samples else (group[0], mi, rep)
        stream = root.derive(*key)
        try:
            samples = sample_study(model, space, n, m, stream.derive(0).generator())
            if samples.n_draws != n * m:
                raise RuntimeError(f"budget audit failed: {samples.n_draws} draws for N*M={n * m}")
            lams = [cfg.lambdas[li] for li in group]
            if kind == "rf_ridge":
                fits = make_estimator(cfg.estimator, lams[0], dims=space.dims).fit_path(samples.thetas, samples.xs, lams)
            else:
                fits = [make_estimator(cfg.estimator, lam, stream.derive(1, li), space.dims).fit(samples.thetas, samples.xs)
                        for lam, li in zip(lams, group)]
            for li, fit in zip(group, fits):
                results.append((li, grid_mse(fit, bench), None, fit))
        except Exception as exc:  # recorded, the rest of the study continues
            log.warning("rep %d, M=%d failed: %s", rep, m, exc)
            results.extend((li, math.nan, f"{type(exc).__name__}: {exc}", None) for li in group)
    return mi, rep, results


def build_benchmark(cfg: ExperimentConfig, model, space, root: RngStream) -> BenchmarkGrid:
    grid = space.grid_points()
    if cfg.benchmark["kind"] == "analytic":
        if not has_analytic_price(model):
            raise ValueError("analytic benchmark requested for a model without a closed form")
        return analytic_benchmark(model, grid)
    return mc_benchmark_grid(model, grid, int(cfg.benchmark["n_sims"]), root.derive(2**32))


def run_case_study(cfg: ExperimentConfig, n_jobs: int = 1, benchmark: BenchmarkGrid | None = None) -> ExperimentReport:
    """Repeated fits and grid errors for every ``(lambda, M, rep)``.

    Streams are keyed by ``(lambda index, M index, rep)`` (or ``(M index,
    rep)`` with ``share_samples``), so results do not depend on ``n_jobs``.
    """
    model = cfg.build_model()
    space = cfg.build_space()
    root = RngStream(cfg.seed)
    bench = benchmark if benchmark is not None else build_benchmark(cfg, model, space, root)
    lam_idx = list(range(len(cfg.lambdas)))
    tasks = [(mi, rep) for mi in range(len(cfg.M)) for rep in range(cfg.reps)]
    outs = Parallel(n_jobs=n_jobs)(
        delayed(_one_cell)(cfg, model, space, bench, mi, rep, lam_idx, root) for mi, rep in tasks
    )
    report = ExperimentReport(cfg.to_dict(), benchmark={
        "points": bench.points.tolist(),
        "values": bench.values.tolist(),
        "stderrs": None if bench.stderrs is None else [_num(s) for s in bench.stderrs],
    })
    first_fits = {}
    for mi, rep, results in sorted(outs, key=lambda o: (o[0], o[1])):
        for li, mse, err, fit in results:
            report.rows.append((cfg.lambdas[li], cfg.M[mi], rep, mse, err))
            if fit is not None and (li, mi) not in first_fits:
                first_fits[(li, mi)] = fit
    report.rows.sort(key=lambda r: (lam_idx[cfg.lambdas.index(r[0])], cfg.M.index(r[1]), r[2]))

    if cfg.curve_points and space.dims == 1:
        (lo, hi), = space.bounds
        line = np.linspace(lo, hi, cfg.curve_points)[:, None]
        ref = model.price(line) if has_analytic_price(model) else np.full(line.shape[0], np.nan)
        for (li, mi), fit in sorted(first_fits.items()):
            pred = fit.predict(line)
            report.curve.extend([cfg.lambdas[li], cfg.M[mi], float(t), float(p), float(r)]
                                for t, p, r in zip(line[:, 0], pred, ref))
    if cfg.heatmap and space.dims == 2:
        for (li, mi), fit in sorted(first_fits.items()):
            pred = fit.predict(bench.points)
            report.heatmap.extend([cfg.lambdas[li], cfg.M[mi], float(p[0]), float(p[1]), float(f), float(b)]
                                  for p, f, b in zip(bench.points, pred, bench.values))
    return report


# -- export -----------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def _write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_report(report: ExperimentReport, path, fmt: str = "csv") -> list[Path]:
    """Write the report into directory ``path``; returns the files written."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if fmt == "json":
        p = out / "report.json"
        try:
            p.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write {p}: {exc}") from exc
        return [p]
    if fmt != "csv":
        raise ValueError("format must be 'csv' or 'json'")
    files = [out / "mse_raw.csv", out / "mse_summary.csv"]
    _write_csv(files[0], ["lambda", "m", "rep", "mse"], [r[:4] for r in report.rows])
    _write_csv(files[1], ["lambda", "m", "q25", "median", "q75"],
               [[s["lambda"], s["m"], s["q25"], s["median"], s["q75"]] for s in report.summary()])
    if report.curve:
        d = len(report.curve[0]) - 4
        files.append(out / "curve.csv")
        _write_csv(files[-1], ["lambda", "m", *[f"theta_{k + 1}" for k in range(d)], "price_fit", "price_ref"],
                   report.curve)
    if report.heatmap:
        files.append(out / "heatmap.csv")
        _write_csv(files[-1], ["lambda", "m", "theta_1", "theta_2", "price_fit", "price_benchmark"], report.heatmap)
    return files


def load_report(path) -> ExperimentReport:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    return ExperimentReport.from_dict(json.loads(p.read_text()))
