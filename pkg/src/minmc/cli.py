"""Command-line entry point ``minmc``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .estimators import load_fit, save_fit
from .harness import (
    ExperimentConfig,
    build_benchmark,
    export_report,
    make_estimator,
    run_case_study,
)
from .models import has_analytic_price, model_from_dict
from .numerics import RngStream
from .sampling import ParamSpace, sample_study


def _config(args) -> ExperimentConfig:
    d = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        d["seed"] = args.seed
    return ExperimentConfig.from_dict(d)


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    out = Path(args.out_dir or (cfg.out_dir if cfg and cfg.out_dir else "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_fit(args) -> int:
    cfg = _config(args)
    lam = cfg.lambdas[0] if args.lam is None else args.lam
    m = cfg.M[0] if args.m is None else args.m
    n = cfg.n_for(m) if args.n is None else args.n
    stream = RngStream(cfg.seed).derive(0, 0, 0)
    samples = sample_study(cfg.build_model(), cfg.build_space(), n, m, stream.derive(0).generator())
    fit = make_estimator(cfg.estimator, lam, stream.derive(1, 0), cfg.build_space().dims).fit(samples.thetas, samples.xs)
    path = save_fit(fit, _out_dir(args, cfg) / "fit.json", {
        "N": n, "M": m, "lambda": lam, "seed": cfg.seed, "model": cfg.model, "space": cfg.space,
    })
    print(path)
    return 0


def cmd_case_study(args) -> int:
    cfg = _config(args)
    report = run_case_study(cfg, n_jobs=args.threads)
    for f in export_report(report, _out_dir(args, cfg), args.format):
        print(f)
    failed = sum(r[4] is not None for r in report.rows)
    if failed:
        print(f"{failed} repetitions failed, see the report", file=sys.stderr)
    return 0


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    if args.n_sims is not None:
        cfg.benchmark = {"kind": "mc", "n_sims": args.n_sims}
    bench = build_benchmark(cfg, cfg.build_model(), cfg.build_space(), RngStream(cfg.seed))
    out = _out_dir(args, cfg)
    if args.format == "json":
        path = out / "benchmark.json"
        path.write_text(json.dumps({"points": bench.points.tolist(), "values": bench.values.tolist(),
                                    "stderrs": bench.stderrs.tolist()}, sort_keys=True) + "\n")
    else:
        path = out / "benchmark.csv"
        bench.to_csv(path)
    print(path)
    return 0


def cmd_theory_check(args) -> int:
    from . import theory

    verdicts = [v.to_dict() for v in theory.appendix_suite(args.instances, seed=args.seed or 0)]
    if args.full:
        root = RngStream(args.seed or 0)
        rate = theory.convergence_rate(reps=args.reps, rng=root.derive(1))
        verdicts.append({"check": "convergence_rate", "params": {"reps": args.reps},
                         "observed": rate.slope, "bound": -0.1,
                         "pass": rate.strictly_decreasing and rate.slope <= -0.1,
                         "details": rate.to_dict()})
        ll = theory.loss_limit(rng=root.derive(2))
        rel = ll.rel_errors[-1]
        verdicts.append({"check": "loss_limit", "params": {"Ns": ll.Ns}, "observed": rel, "bound": 0.05,
                         "pass": rel <= 0.05, "details": ll.to_dict()})
    ok = all(v["pass"] for v in verdicts)
    if args.summary:
        by = {}
        for v in verdicts:
            c = by.setdefault(v["check"], [0, 0])
            c[0] += v["pass"]
            c[1] += 1
        print(json.dumps({"pass": ok, "checks": {k: f"{a}/{b}" for k, (a, b) in by.items()}}, indent=1))
    else:
        print(json.dumps({"pass": ok, "verdicts": verdicts}, indent=1))
    return 0 if ok else 1


def cmd_curve(args) -> int:
    fit, meta = load_fit(args.fit)
    space = ParamSpace(tuple(tuple(b) for b in meta["space"]["bounds"])) if "space" in meta else ParamSpace()
    if space.dims != 1:
        print("curve export needs a one-dimensional parameter space", file=sys.stderr)
        return 2
    (lo, hi), = space.bounds
    line = np.linspace(lo, hi, args.points)[:, None]
    pred = fit.predict(line)
    ref = np.full(line.shape[0], np.nan)
    if "model" in meta:
        model = model_from_dict(meta["model"])
        if has_analytic_price(model):
            ref = model.price(line)
    out = _out_dir(args)
    if args.format == "json":
        path = out / "curve.json"
        path.write_text(json.dumps({"theta": line[:, 0].tolist(), "price_fit": pred.tolist(),
                                    "price_ref": [None if np.isnan(r) else r for r in ref]}) + "\n")
    else:
        path = out / "curve.csv"
        rows = ["theta_1,price_fit,price_ref"]
        rows += [f"{t!r},{p!r},{'' if np.isnan(r) else repr(r)}" for t, p, r in
                 zip(line[:, 0].tolist(), pred.tolist(), ref.tolist())]
        path.write_text("\n".join(rows) + "\n")
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes for repetitions")
    common.add_argument("--out-dir", default=None)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    # the shared flags live on every subcommand: ``minmc case-study cfg.json --seed 3``
    p = argparse.ArgumentParser(prog="minmc", description="Learn parameter-to-price maps by MinMC.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common], help="fit once and save the artifact")
    f.add_argument("config")
    f.add_argument("--lam", type=float, default=None)
    f.add_argument("--m", type=int, default=None)
    f.add_argument("--n", type=int, default=None)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("case-study", parents=[common], help="run a case study from a config")
    c.add_argument("config")
    c.set_defaults(func=cmd_case_study)

    b = sub.add_parser("benchmark", parents=[common], help="benchmark prices on the config grid")
    b.add_argument("config")
    b.add_argument("--n-sims", type=int, default=None)
    b.set_defaults(func=cmd_benchmark)

    t = sub.add_parser("theory-check", parents=[common], help="run the theory checks")
    t.add_argument("--instances", type=int, default=100)
    t.add_argument("--full", action="store_true", help="also run the rate and loss-limit studies")
    t.add_argument("--reps", type=int, default=20)
    t.add_argument("--summary", action="store_true", help="print pass counts instead of every verdict")
    t.set_defaults(func=cmd_theory_check)

    cv = sub.add_parser("curve", parents=[common], help="export a price curve for a saved fit")
    cv.add_argument("fit")
    cv.add_argument("--points", type=int, default=500)
    cv.set_defaults(func=cmd_curve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
