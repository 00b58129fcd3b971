import numpy as np
import pytest
from sklearn.base import clone

from minmc.estimators import (
    KernelRidgeMinMC,
    MLPMinMC,
    RandomFeatureRidge,
    TrainConfig,
    TrainingDivergedError,
    empirical_loss,
    krr_fit,
    krr_predict,
    mlp_fit,
    mlp_predict,
    rf_ridge_fit,
)
from minmc.estimators.mlp import _layer_shapes, _n_params, rkhs01_matrix
from minmc.kernels import FeatureMapKernel, FeatureNodes, TriangularKernel, gram
from minmc.models import BlackScholesModel, BsSpec
from minmc.numerics import RngStream, SingularMatrixError
from minmc.sampling import ParamSpace, SampleSet, sample_study


def _study(n, seed=0, **bs):
    return sample_study(BlackScholesModel(BsSpec(**bs)), ParamSpace(), n, 1, RngStream(seed).generator())


# -- kernel ridge ---------------------------------------------------------------


def test_krr_scalar_case():
    fit = KernelRidgeMinMC(TriangularKernel(), 1.0).fit([[0.5]], [2.0])
    assert fit.dual_coef_ == pytest.approx([1.0])


@pytest.mark.parametrize("lam, alpha", [(0.25, [0.25, 1.25]), (0.5, [4 / 15, 14 / 15])])
def test_krr_two_point_example(lam, alpha):
    # G + N lam I = [[1 + 2 lam, 0.5], [0.5, 1 + 2 lam]]; at lam = 0.5 this is
    # the 2x2 system of the SPD-solve example
    fit = krr_fit(TriangularKernel(), SampleSet([[0.25], [0.75]], [1.0, 2.0]), lam)
    assert fit.dual_coef_ == pytest.approx(alpha, abs=1e-12)
    G = gram(TriangularKernel(), fit.anchors_)
    r = (G + 2 * lam * np.eye(2)) @ fit.dual_coef_ - [1, 2]
    assert np.linalg.norm(r) <= 1e-8 * np.sqrt(5)


def test_krr_interpolates_at_zero_ridge():
    s = _study(40)
    fit = krr_fit(TriangularKernel(), s, 0.0)
    assert np.max(np.abs(fit.predict(s.thetas) - s.xs)) < 1e-6
    assert empirical_loss(fit, s) < 1e-10


def test_krr_singular_message():
    with pytest.raises(SingularMatrixError, match="add a ridge"):
        KernelRidgeMinMC(TriangularKernel(), 0.0).fit([[0.3], [0.3], [0.3]], [1.0, 2.0, 3.0])


def test_krr_predict_examples():
    fit = KernelRidgeMinMC(TriangularKernel(), 1.0).fit([[0.25], [0.75]], [0.0, 0.0])
    fit.dual_coef_ = np.array([1.0, 0.0])
    assert krr_predict(fit, 0.25) == pytest.approx(1.0)
    fit.dual_coef_ = np.zeros(2)
    assert np.all(fit.predict(np.linspace(0, 1, 11)) == 0)
    a, b = np.array([0.3, -1.0]), np.array([2.0, 0.5])
    grid = np.linspace(0, 1, 7)
    fit.dual_coef_ = a + b
    both = fit.predict(grid)
    fit.dual_coef_ = a
    pa = fit.predict(grid)
    fit.dual_coef_ = b
    assert np.allclose(both, pa + fit.predict(grid))


def test_krr_domain_violation():
    fit = KernelRidgeMinMC(TriangularKernel(), 0.1).fit([[0.2]], [1.0])
    with pytest.raises(ValueError):
        fit.predict([[1.5]])


def test_krr_first_order_optimality():
    s = _study(60, seed=3)
    fit = krr_fit(TriangularKernel(), s, 0.01)
    base = fit.objective(s.thetas, s.xs)
    rng = np.random.default_rng(0)
    for _ in range(100):
        beta = rng.standard_normal(s.n)
        assert base <= fit.objective(s.thetas, s.xs, fit.dual_coef_ + 1e-3 * beta)


def test_krr_norm_monotone_in_lambda():
    s = _study(80, seed=4)
    norms = [krr_fit(TriangularKernel(), s, lam).rkhs_norm_sq() for lam in np.logspace(-4, 0, 9)]
    assert np.all(np.diff(norms) <= 1e-9 * norms[0])


@pytest.mark.parametrize("est", [KernelRidgeMinMC(TriangularKernel(), 0.01), RandomFeatureRidge(FeatureNodes(64), 0.01)],
                         ids=["krr", "rf"])
def test_permutation_invariance(est):
    s = _study(150, seed=5)
    perm = np.random.default_rng(1).permutation(s.n)
    grid = np.linspace(0, 1, 50)[:, None]
    a = clone(est).fit(s.thetas, s.xs).predict(grid)
    b = clone(est).fit(s.thetas[perm], s.xs[perm]).predict(grid)
    assert np.max(np.abs(a - b)) < 1e-10


# -- random features --------------------------------------------------------------


def test_rf_constant_feature():
    s = _study(30, seed=6)
    lam = 0.5
    fit = rf_ridge_fit(FeatureNodes(1, activation="constant"), s, lam)
    assert fit.coef_[0] == pytest.approx(s.xs.mean() / (1 + lam), rel=1e-12)
    assert np.allclose(fit.predict(np.linspace(0, 1, 5)), fit.coef_[0])


def test_rf_huge_ridge():
    s = _study(100, seed=7)
    D = 64
    fit = rf_ridge_fit(FeatureNodes(D), s, 1e9)
    assert np.linalg.norm(fit.coef_) <= 1e-6 * np.linalg.norm(s.xs) * D / 1e9 * 1e6
    assert np.max(np.abs(fit.predict(np.linspace(0, 1, 11)))) < 1e-4


def test_rf_krr_duality():
    s = _study(200, seed=8)
    nodes = FeatureNodes(2048, seed=2)
    grid = np.linspace(0, 1, 100)[:, None]
    primal = rf_ridge_fit(nodes, s, 0.01).predict(grid)
    dual = krr_fit(FeatureMapKernel(nodes), s, 0.01).predict(grid)
    assert np.max(np.abs(primal - dual)) < 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_rf_krr_duality_random(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (50, 1))
    y = rng.standard_normal(50)
    nodes = FeatureNodes(int(rng.integers(20, 200)), seed=seed)
    lam = float(10 ** rng.uniform(-3, 0))
    grid = np.linspace(-1, 1, 30)[:, None]
    a = RandomFeatureRidge(nodes, lam).fit(X, y).predict(grid)
    b = KernelRidgeMinMC(FeatureMapKernel(nodes), lam).fit(X, y).predict(grid)
    assert np.max(np.abs(a - b)) < 1e-6


def test_rf_zero_ridge_flags_jitter():
    s = _study(20, seed=9)
    fit = RandomFeatureRidge(FeatureNodes(256), 0.0).fit(s.thetas, s.xs)
    assert fit.jitter_ > 0
    assert np.all(np.isfinite(fit.coef_))


def test_rf_fit_path_matches_individual_fits():
    s = _study(300, seed=10)
    lams = [1.0, 0.01, 0.0]
    path = RandomFeatureRidge(FeatureNodes(32)).fit_path(s.thetas, s.xs, lams)
    for lam, f in zip(lams, path):
        g = RandomFeatureRidge(FeatureNodes(32), lam).fit(s.thetas, s.xs)
        assert np.array_equal(f.coef_, g.coef_)


def test_rf_chunking_is_invisible():
    s = _study(1000, seed=11)
    a = RandomFeatureRidge(FeatureNodes(64), 0.01, chunk_size=97).fit(s.thetas, s.xs)
    b = RandomFeatureRidge(FeatureNodes(64), 0.01).fit(s.thetas, s.xs)
    assert np.allclose(a.coef_, b.coef_, rtol=1e-10, atol=1e-10)


def test_empirical_loss_zero_predictor():
    s = _study(50)
    fit = RandomFeatureRidge(FeatureNodes(8), 0.1).fit(s.thetas, s.xs)
    fit.coef_ = np.zeros(8)
    assert empirical_loss(fit, s) == pytest.approx(np.mean(s.xs**2))


def test_estimators_are_sklearn_compatible():
    est = RandomFeatureRidge(FeatureNodes(16), 0.3)
    assert clone(est).get_params()["lam"] == 0.3
    s = _study(100)
    assert -np.inf < est.fit(s.thetas, s.xs).score(s.thetas, s.xs) <= 1


# -- MLP --------------------------------------------------------------------------


def test_mlp_gradient_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (8, 1))
    y = rng.normal(5, 2, 8)
    for penalty in ("none", "l2_feature", "rkhs01"):
        est = MLPMinMC(lam=0.05, penalty=penalty)
        w = est._init_params(_layer_shapes(1, est.hidden), rng)
        w += 0.05 * rng.standard_normal(w.size)
        _, g = est.loss_and_grad(w, X, y)
        for j in rng.choice(w.size, 20, replace=False):
            e = np.zeros_like(w)
            e[j] = 1e-5
            num = (est.loss_and_grad(w + e, X, y)[0] - est.loss_and_grad(w - e, X, y)[0]) / 2e-5
            assert abs(num - g[j]) <= 1e-5 * max(abs(num), abs(g[j]), 1e-3), (penalty, j)


def test_mlp_constant_targets():
    X = np.random.default_rng(1).uniform(0, 1, (1000, 1))
    c = 3.0
    fit = MLPMinMC(random_state=4).fit(X, np.full(1000, c))
    assert np.mean((fit.predict(X) - c) ** 2) <= 1e-3 * c**2
    assert len(fit.loss_curve_) == 50


def test_mlp_deterministic():
    s = _study(200)
    a = MLPMinMC(epochs=3, random_state=2).fit(s.thetas, s.xs)
    b = MLPMinMC(epochs=3, random_state=2).fit(s.thetas, s.xs)
    assert np.array_equal(a.coefs_, b.coefs_)
    c = MLPMinMC(epochs=3, random_state=2, shuffle_seed=9).fit(s.thetas, s.xs)
    assert not np.array_equal(a.coefs_, c.coefs_)


def test_mlp_predict_examples():
    fit = MLPMinMC(epochs=1).fit(np.zeros((4, 1)), np.ones(4))
    w = fit.coefs_.copy()
    fit.coefs_ = np.zeros_like(w)
    assert np.all(fit.predict(np.linspace(-5, 5, 9)) == 0)
    fit.coefs_ = w
    ref = fit.predict(np.linspace(0, 1, 5))
    W, b = fit.layers()[-1]
    W *= 10
    b *= 10
    assert np.allclose(fit.predict(np.linspace(0, 1, 5)), 10 * ref)
    assert np.all(np.isfinite(fit.predict([[-1e3], [1e3]])))
    with pytest.raises(ValueError):
        fit.predict(np.zeros((2, 2)))


def test_mlp_diverged():
    with pytest.raises(TrainingDivergedError):
        MLPMinMC(epochs=2, learning_rate=1e12).fit(np.linspace(0, 1, 64)[:, None], np.full(64, 1e200))


@pytest.mark.parametrize("kw", [{"epochs": 0}, {"batch_size": 0}, {"learning_rate": 0.0}, {"lam": -1.0},
                                {"penalty_mode": "weight_decay"}])
def test_train_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_mlp_fit_from_config():
    s = _study(64)
    fit = mlp_fit(s, TrainConfig(epochs=2, hidden=(8, 8)), RngStream(1))
    assert _n_params(fit.layer_shapes_) == fit.coefs_.size
    assert isinstance(mlp_predict(fit, 0.5), float)


def test_rkhs01_matrix_is_triangular_norm():
    # piecewise-linear interpolant of k_x has squared norm k(x, x) = 1
    n = 201
    grid = np.linspace(0, 1, n)
    h = 1 - np.abs(grid - 0.3)
    assert 0.5 * h @ rkhs01_matrix(n) @ h == pytest.approx(1.0, abs=1e-12)


def test_mlp_penalty_batch_reduces_to_full():
    s = _study(64)
    kw = dict(epochs=2, hidden=(6, 6), lam=0.1, penalty="rkhs01")
    full = MLPMinMC(**kw).fit(s.thetas, s.xs)
    sub = MLPMinMC(penalty_batch=10_000, **kw).fit(s.thetas, s.xs)
    assert np.allclose(full.predict(s.thetas), sub.predict(s.thetas), rtol=1e-6, atol=1e-6)
