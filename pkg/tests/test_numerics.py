import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minmc.numerics import (
    RngStream,
    SingularMatrixError,
    cholesky_jitter,
    normal_pair_correlated,
    quantile,
    solve_spd,
    sym_op_norm,
    trapezoid,
)


def test_stream_reproducible():
    a = RngStream(3, (1, 2)).generator().standard_normal(100)
    b = RngStream(3).derive(1, 2).generator().standard_normal(100)
    assert np.array_equal(a, b)


def test_derived_streams_uncorrelated():
    s = RngStream(11)
    x = s.derive(0).generator().standard_normal(100_000)
    y = s.derive(1).generator().standard_normal(100_000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.01


@pytest.mark.parametrize("bad", [(-1, ()), (2**64, ()), (0, (-1,))])
def test_stream_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        RngStream(*bad)


@pytest.mark.parametrize("rho", [0.0, -0.5, 0.8])
def test_correlated_normals(rho):
    z1, z2 = normal_pair_correlated(RngStream(1).generator(), rho, 1_000_000)
    assert abs(np.corrcoef(z1, z2)[0, 1] - rho) < 0.004
    assert abs(z2.std() - 1) < 0.004


def test_correlated_normals_degenerate():
    z1, z2 = normal_pair_correlated(RngStream(2).generator(), 1.0, 1000)
    assert np.array_equal(z1, z2)


@pytest.mark.parametrize("rho", [1.01, -2.0])
def test_correlated_normals_rejects(rho):
    with pytest.raises(ValueError):
        normal_pair_correlated(RngStream(0).generator(), rho, 3)


def test_solve_identity():
    assert np.allclose(solve_spd(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])


def test_solve_two_by_two():
    x = solve_spd(np.array([[2, 0.5], [0.5, 2]]), [1.0, 2.0])
    assert np.allclose(x, [4 / 15, 14 / 15], atol=1e-12)


def test_solve_nearly_singular_diagonal():
    try:
        x = solve_spd(np.diag([1e-14, 1.0]), np.array([0.0, 1.0]))
    except SingularMatrixError:
        return
    assert abs(x[1] - 1) < 1e-8


def test_jitter_escalation_then_failure():
    A = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    with pytest.raises(SingularMatrixError):
        cholesky_jitter(A)
    L, jitter = cholesky_jitter(np.ones((3, 3)))
    assert jitter > 0
    assert np.allclose(L @ L.T, np.ones((3, 3)) + jitter * np.eye(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 120), st.integers(0, 2**32 - 1))
def test_solve_residual(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    A = B @ B.T + 1e-3 * np.eye(n)
    b = rng.standard_normal(n)
    x = solve_spd(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-8 * np.linalg.norm(b)


def test_solve_residual_dim_500():
    rng = np.random.default_rng(5)
    B = rng.standard_normal((500, 500))
    A = B @ B.T + 1e-2 * np.eye(500)
    b = rng.standard_normal(500)
    assert np.linalg.norm(A @ solve_spd(A, b) - b) <= 1e-8 * np.linalg.norm(b)


@pytest.mark.parametrize(
    "values, p, expected",
    [([1, 2, 3, 4, 5], 0.5, 3.0), ([1, 2, 3, 4], 0.25, 1.75), ([7], 0.3, 7.0)],
)
def test_quantile_examples(values, p, expected):
    assert quantile(values, p) == expected


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_quantile_extremes(v):
    assert quantile(v, 0) == min(v)
    assert quantile(v, 1) == max(v)


def test_quantile_does_not_mutate():
    v = np.array([3.0, 1.0, 2.0])
    quantile(v, 0.5)
    assert v.tolist() == [3.0, 1.0, 2.0]


@pytest.mark.parametrize("args", [([], 0.5), ([1.0], 1.5)])
def test_quantile_rejects(args):
    with pytest.raises(ValueError):
        quantile(*args)


def test_trapezoid_examples():
    g = np.sort(np.random.default_rng(0).uniform(0, 1, 20))
    g = np.r_[0.0, g, 1.0]
    assert trapezoid(np.ones_like(g), g) == pytest.approx(1.0, abs=1e-14)
    x = np.linspace(0, 1, 101)
    assert trapezoid(x, x) == pytest.approx(0.5, abs=1e-15)
    x = np.linspace(0, 1, 1001)
    assert abs(trapezoid(x**2, x) - 1 / 3) < 1e-6


@pytest.mark.parametrize("f, grid", [([1.0, 2.0], [0.0, 1.0, 2.0]), ([1.0, 1.0], [1.0, 0.0]), ([1.0], [0.0])])
def test_trapezoid_rejects(f, grid):
    with pytest.raises(ValueError):
        trapezoid(f, grid)


def test_sym_op_norm_matches_svd():
    rng = np.random.default_rng(2)
    B = rng.standard_normal((30, 30))
    S = B + B.T
    assert sym_op_norm(S) == pytest.approx(np.linalg.svd(S, compute_uv=False)[0], rel=1e-12)
