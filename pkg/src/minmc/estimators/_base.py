from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_X_y


def validate_fit_input(X, y):
    X, y = check_X_y(X, y, dtype=np.float64, ensure_2d=False, y_numeric=True)
    if X.ndim == 1:
        X = X[:, None]
    return X, y.astype(np.float64)


def validate_predict_input(X, n_features: int):
    if np.ndim(X) == 0:
        X = np.reshape(X, (1, 1))
    X = check_array(X, dtype=np.float64, ensure_2d=False)
    if X.ndim == 1:
        X = X[:, None] if n_features == 1 else X[None, :]
    if X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, the fit expects {n_features}")
    return X


def empirical_loss(fit, samples) -> float:
    """Unregularised empirical risk ``mean((h(theta_i) - x_i)**2)``."""
    resid = fit.predict(samples.thetas) - samples.xs
    return float(np.mean(resid * resid))
