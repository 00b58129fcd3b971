"""Versioned JSON artifacts for fitted surfaces."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..kernels import FeatureNodes, kernel_from_dict
from ..numerics import RngStream
from .krr import KernelRidgeMinMC
from .mlp import MLPMinMC
from .random_features import RandomFeatureRidge

FORMAT = "minmc-fit"
VERSION = 1


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def fit_to_dict(fit, metadata: dict | None = None) -> dict:
    """Serialisable state of a fitted estimator plus free-form metadata
    (conventionally ``N``, ``M``, ``lambda`` and ``seed``)."""
    if isinstance(fit, KernelRidgeMinMC):
        kind = "krr"
        state = {
            "kernel": fit._kernel().to_dict(),
            "lam": fit.lam,
            "anchors": _floats(fit.anchors_),
            "dual_coef": _floats(fit.dual_coef_),
            "jitter": fit.jitter_,
        }
    elif isinstance(fit, RandomFeatureRidge):
        kind = "rf_ridge"
        state = {
            "nodes": fit._nodes().to_dict(),
            "lam": fit.lam,
            "coef": _floats(fit.coef_),
            "jitter": fit.jitter_,
            "n_features": fit.n_features_in_,
        }
    elif isinstance(fit, MLPMinMC):
        kind = "mlp"
        params = fit.get_params()
        if isinstance(params["random_state"], RngStream):
            rs = params["random_state"]
            params["random_state"] = {"seed": rs.seed, "stream_id": list(rs.stream_id)}
        params["hidden"] = list(params["hidden"])
        state = {
            "params": params,
            "coefs": _floats(fit.coefs_),
            "layer_shapes": [list(s) for s in fit.layer_shapes_],
            "loss_curve": _floats(fit.loss_curve_),
        }
    else:
        raise TypeError(f"cannot serialise {type(fit).__name__}")
    return {"format": FORMAT, "version": VERSION, "estimator": kind, "state": state,
            "metadata": dict(metadata or {})}


def fit_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ValueError("not a fit artifact")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported artifact version {d.get('version')!r}")
    s = d["state"]
    kind = d["estimator"]
    if kind == "krr":
        fit = KernelRidgeMinMC(kernel_from_dict(s["kernel"]), s["lam"])
        fit.anchors_ = np.array(s["anchors"], dtype=float)
        fit.dual_coef_ = np.array(s["dual_coef"], dtype=float)
        fit.jitter_ = s["jitter"]
        fit.n_features_in_ = fit.anchors_.shape[1]
        fit.gram_ = fit._kernel()(fit.anchors_)
    elif kind == "rf_ridge":
        fit = RandomFeatureRidge(FeatureNodes(**s["nodes"]), s["lam"])
        fit.coef_ = np.array(s["coef"], dtype=float)
        fit.jitter_ = s["jitter"]
        fit.norm_sq_ = float(fit.coef_ @ fit.coef_ / fit.coef_.size)
        fit.n_features_in_ = s["n_features"]
    elif kind == "mlp":
        params = dict(s["params"])
        rs = params["random_state"]
        if isinstance(rs, dict):
            params["random_state"] = RngStream(rs["seed"], tuple(rs["stream_id"]))
        params["hidden"] = tuple(params["hidden"])
        fit = MLPMinMC(**params)
        fit.coefs_ = np.array(s["coefs"], dtype=float)
        fit.layer_shapes_ = [tuple(x) for x in s["layer_shapes"]]
        fit.loss_curve_ = list(s["loss_curve"])
        fit.n_features_in_ = fit.layer_shapes_[0][0]
    else:
        raise ValueError(f"unknown estimator kind {kind!r}")
    return fit


def save_fit(fit, path, metadata: dict | None = None) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(fit_to_dict(fit, metadata), sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write fit artifact to {path}: {exc}") from exc
    return path


def load_fit(path):
    """Return ``(fit, metadata)``."""
    d = json.loads(Path(path).read_text())
    return fit_from_dict(d), d.get("metadata", {})
