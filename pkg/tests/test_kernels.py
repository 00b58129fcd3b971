import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minmc.kernels import (
    FeatureMapKernel,
    FeatureNodes,
    FilipovicKernel,
    LaplaceKernel,
    TriangularKernel,
    eval_kernel,
    feature_matrix,
    gram,
    kernel_from_dict,
    rkhs_inner_triangular,
)

KERNELS = [TriangularKernel(), LaplaceKernel(), FilipovicKernel(), FeatureMapKernel(FeatureNodes(64))]


@pytest.mark.parametrize(
    "kernel, x, y, expected",
    [
        (TriangularKernel(), 0.3, 0.7, 0.6),
        (FilipovicKernel(), 0.0, 3.7, 1.0),
        (FilipovicKernel(), 1.0, 2.0, 2 - math.exp(-1)),
        (LaplaceKernel(), 0.4, 0.4, math.sqrt(math.pi / 2)),
    ],
)
def test_eval_examples(kernel, x, y, expected):
    assert eval_kernel(kernel, x, y) == pytest.approx(expected, abs=1e-12)


def test_laplace_constant_from_fourier_oracle():
    # c e^{-|t|} is the inverse Fourier transform of u -> 1/(1+u^2) up to sqrt(2 pi)
    u = np.linspace(-2000, 2000, 2_000_001)
    oracle = np.trapezoid(1 / (1 + u**2), u) / math.sqrt(2 * math.pi)
    assert LaplaceKernel().scale == pytest.approx(oracle, rel=1e-3)


@pytest.mark.parametrize(
    "kernel, point",
    [(TriangularKernel(), 1.2), (TriangularKernel(), -0.1), (FilipovicKernel(), -1.0)],
)
def test_domain_violation(kernel, point):
    with pytest.raises(ValueError):
        eval_kernel(kernel, point, 0.5)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.kind)
def test_symmetry_and_psd(kernel):
    rng = np.random.default_rng(4)
    X = rng.uniform(0, 1, (1000, 1))
    Y = rng.uniform(0, 1, (1000, 1))
    kxy = np.array([eval_kernel(kernel, a, b) for a, b in zip(X[:50], Y[:50])])
    kyx = np.array([eval_kernel(kernel, b, a) for a, b in zip(X[:50], Y[:50])])
    assert np.array_equal(kxy, kyx)
    assert np.array_equal(kernel(X, Y), kernel(Y, X).T)
    ev = np.linalg.eigvalsh(gram(kernel, X[:50]))
    assert ev[0] >= -1e-8 * ev[-1]


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.kind)
def test_diagonal_bound(kernel):
    x = np.linspace(0, 1, 101)[:, None]
    assert np.all(np.diag(kernel(x)) <= kernel.diag_bound + 1e-12)


def test_gram_examples():
    assert np.array_equal(gram(TriangularKernel(), [0.25, 0.75]), [[1, 0.5], [0.5, 1]])
    for k in KERNELS:
        G = gram(k, [0.3])
        assert G.shape == (1, 1) and G[0, 0] == eval_kernel(k, 0.3, 0.3)


def test_gram_exactly_symmetric():
    G = gram(FeatureMapKernel(FeatureNodes(33, seed=2)), np.random.default_rng(1).normal(size=40))
    assert np.array_equal(G, G.T)


def _tri(x, grid):
    return 1 - np.abs(x - grid)


def test_rkhs_inner_examples():
    g = np.linspace(0, 1, 1001)
    assert abs(rkhs_inner_triangular(_tri(0.2, g), _tri(0.9, g), g) - 0.3) < 2e-2
    assert rkhs_inner_triangular(np.ones_like(g), np.ones_like(g), g) == pytest.approx(2.0)
    for x in (0.1, 0.5, 0.9):
        assert abs(rkhs_inner_triangular(_tri(x, g), g**2, g) - x**2) < 2e-2


def test_rkhs_inner_reproducing_first_order():
    f = lambda t: np.sin(3 * t) + t**2  # noqa: E731
    errs = []
    for n in (101, 1001):
        g = np.linspace(0, 1, n)
        errs.append(abs(rkhs_inner_triangular(_tri(0.37, g), f(g), g) - f(0.37)))
    assert errs[1] < errs[0] / 5


def test_rkhs_inner_rejects_coarse_grid():
    g = np.linspace(0, 1, 50)
    with pytest.raises(ValueError):
        rkhs_inner_triangular(g, g, g)


def test_feature_matrix_examples():
    nodes = FeatureNodes(1, distribution="uniform", low=0.0, high=1e-300)
    assert feature_matrix(nodes, [0.0])[0, 0] == pytest.approx(0.0, abs=1e-290)
    nodes = FeatureNodes(40, seed=3)
    A = feature_matrix(nodes, np.linspace(-3, 3, 25))
    assert np.all(np.abs(A) <= 1 / 40)


def test_feature_matrix_matches_kernel():
    nodes = FeatureNodes(128, seed=8)
    pts = np.random.default_rng(0).normal(size=30)
    A = feature_matrix(nodes, pts)
    K = FeatureMapKernel(nodes)(pts[:, None])
    assert np.allclose(nodes.n_nodes * A @ A.T, K, atol=1e-12, rtol=0)


def test_feature_kernel_law_of_large_numbers():
    from scipy.stats import norm

    x, y = 0.3, -0.8
    u = np.linspace(-8, 8, 10_001)
    prod = np.tanh(x + u) * np.tanh(y + u)
    k_quad = np.trapezoid(prod * norm.pdf(u), u)
    nodes = FeatureNodes(4096, seed=1)
    samples = np.tanh(x + nodes.nodes[:, 0]) * np.tanh(y + nodes.nodes[:, 0])
    k_D = eval_kernel(FeatureMapKernel(nodes), x, y)
    assert abs(k_D - k_quad) <= 3 * samples.std() / math.sqrt(4096)


def test_nodes_reproducible_and_configurable():
    assert np.array_equal(FeatureNodes(10, seed=4).nodes, FeatureNodes(10, seed=4).nodes)
    box = FeatureNodes(500, 2, distribution="uniform", low=[-11, -1.2], high=[0, 0])
    assert np.all((box.nodes >= [-11, -1.2]) & (box.nodes <= [0, 0]))
    with pytest.raises(ValueError):
        FeatureNodes(0)


@pytest.mark.parametrize("reduction", ["product", "sum"])
def test_multivariate_features(reduction):
    nodes = FeatureNodes(16, 2, reduction=reduction, seed=1)
    P = np.array([[0.3, -0.2], [1.0, 0.5]])
    U = nodes.nodes
    if reduction == "sum":
        ref = np.tanh(P.sum(1)[:, None] + U.sum(1)[None, :])
    else:
        ref = np.tanh(P[:, :1] + U[:, 0]) * np.tanh(P[:, 1:] + U[:, 1])
    assert np.allclose(nodes.phi(P), ref)
    with pytest.raises(ValueError):
        nodes.phi(np.zeros((2, 3)))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["triangular", "laplace", "filipovic", "feature_map"]))
def test_kernel_dict_round_trip(kind):
    k = kernel_from_dict({"kind": kind})
    assert kernel_from_dict(k.to_dict()) == k


def test_kernel_dict_unknown():
    with pytest.raises(ValueError):
        kernel_from_dict({"kind": "matern"})
