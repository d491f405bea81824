import io
import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from fistalyap import problems as pb
from fistalyap.rng import SplitMix64

from oracles import lasso_coordinate_descent

CASES = [(name, dim) for name in pb.CATALOG_NAMES for dim in (2, 5)] + [("quadratic-spd", 1)]


@pytest.fixture(scope="module")
def built():
    return {(n, d): pb.catalog(n, d, seed=3) for n, d in CASES}


# ---------------------------------------------------------------- examples

def test_soft_threshold_examples():
    assert np.array_equal(pb.soft_threshold(np.array([2.0]), 1.0), [1.0])
    assert np.array_equal(pb.soft_threshold(np.array([-0.5]), 1.0), [0.0])
    assert np.array_equal(pb.soft_threshold(np.array([-3.0, 0.2]), 0.5), [-2.5, 0.0])
    y = np.array([1.5, -2.0, 0.0])
    assert np.array_equal(pb.soft_threshold(y, 0.0), y)
    with pytest.raises(ValueError):
        pb.soft_threshold(y, -1.0)


def test_grad_check_examples():
    rng = SplitMix64(11)
    half_norm = pb.Quadratic(np.eye(4))
    assert pb.grad_check(half_norm, rng.normal(4), 1e-5) <= 1e-9
    logistic = pb.catalog("logistic-l2", 5, seed=1).smooth
    assert pb.grad_check(logistic, np.zeros(5), 1e-5) <= 1e-6
    affine = pb.Affine(np.array([1.0, -2.0, 3.0]))
    assert pb.grad_check(affine, np.zeros(3), 1e-5) <= 1e-12
    # away from 0 only the rounding floor eps |f(x)| / h remains
    x = rng.normal(3)
    assert pb.grad_check(affine, x, 1e-5) <= 4 * np.finfo(float).eps * max(1.0, abs(affine.value(x))) / 1e-5
    with pytest.raises(ValueError):
        pb.grad_check(half_norm, np.zeros(4), 0.0)


def test_catalog_spd_dim1():
    p = pb.catalog("quadratic-spd", 1, seed=99)
    assert p.L == 1.0 and p.optimal_value == 0.0
    assert np.array_equal(p.known_minimizers[0], [0.0])
    assert p.objective(np.array([3.0])) == 4.5


def test_catalog_degenerate_dim2():
    p = pb.catalog("quadratic-degenerate", 2, seed=0)
    assert p.L == 1.0 and p.optimal_value == 0.0
    z, v = p.known_minimizers
    assert np.array_equal(z, [0, 0]) and np.array_equal(v, [0, 1])
    assert p.objective(np.array([3.0, -7.0])) == 4.5
    assert np.allclose(p.project_argmin(np.array([3.0, -7.0])), [0.0, -7.0])


def test_lasso_optimal_value_against_coordinate_descent():
    p = pb.catalog("lasso", 5, seed=42)
    M, y, tau = p.smooth.M, p.smooth.y, p.nonsmooth.tau
    x_cd, f_cd = lasso_coordinate_descent(M, y, tau)
    assert abs(p.optimal_value - f_cd) <= 1e-12
    assert np.linalg.norm(p.known_minimizers[0] - x_cd) <= 1e-9


def test_catalog_errors():
    with pytest.raises(ValueError):
        pb.catalog("rosenbrock", 3)
    with pytest.raises(ValueError):
        pb.catalog("quadratic-degenerate", 1)
    with pytest.raises(ValueError):
        pb.catalog("lasso", 0)


def test_catalog_is_reproducible():
    a, b = pb.catalog("huber", 4, seed=5), pb.catalog("huber", 4, seed=5)
    assert np.array_equal(a.smooth.M, b.smooth.M)
    assert a.optimal_value == b.optimal_value
    assert not np.array_equal(a.smooth.M, pb.catalog("huber", 4, seed=6).smooth.M)


def test_degenerate_exposes_distinct_minimizers():
    for dim in (2, 3, 6):
        p = pb.catalog("quadratic-degenerate", dim, seed=1)
        z, v = p.known_minimizers[:2]
        assert not np.array_equal(z, v)
        assert np.linalg.matrix_rank(p.smooth.A) < dim


# -------------------------------------------------------- known minimizers

@pytest.mark.parametrize("case", CASES)
def test_minimizer_value_and_fixed_point(built, case):
    p = built[case]
    lam = 1.0 / p.L
    assert p.known_minimizers
    for z in p.known_minimizers:
        assert abs(p.objective(z) - p.optimal_value) <= 1e-10
        assert np.linalg.norm(z - p.prox(lam, z - lam * p.gradient(z))) <= 1e-9
        if p.nonsmooth is None:
            assert np.linalg.norm(p.gradient(z)) <= 1e-10 * max(1.0, p.L)


@pytest.mark.parametrize("case", CASES)
def test_exact_L_is_hessian_norm(built, case):
    p = built[case]
    f = p.smooth
    if isinstance(f, pb.Quadratic):
        H = f.A
    elif isinstance(f, pb.LeastSquares):
        H = f.M.T @ f.M
    else:
        return
    assert p.L == pytest.approx(np.linalg.eigvalsh(H)[-1], rel=1e-12)


@pytest.mark.parametrize("case", CASES)
def test_grad_check_on_random_points(built, case):
    p = built[case]
    rng = SplitMix64(1000 + p.dim)
    worst = max(pb.grad_check(p.smooth, rng.uniform(-2, 2, size=p.dim), 1e-5) for _ in range(100))
    assert worst <= 1e-5


@pytest.mark.parametrize("case", CASES)
def test_bregman_gap_matches_direct_difference(built, case):
    p = built[case]
    rng = SplitMix64(7)
    for _ in range(20):
        x = rng.uniform(-3, 3, size=p.dim)
        direct = p.objective(x) - p.optimal_value
        assert p.gap(x) == pytest.approx(direct, rel=1e-9, abs=1e-12)
        assert p.gap(x) >= -1e-12 * max(1.0, abs(p.optimal_value))


# ------------------------------------------------------------- properties

def _vec(dim):
    return st.lists(st.floats(-5, 5, allow_nan=False), min_size=dim, max_size=dim).map(np.array)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CASES), st.data())
def test_gradient_lipschitz_and_convexity(case, data):
    p = pb.catalog(*case, seed=3)
    f = p.smooth
    x, y = data.draw(_vec(p.dim)), data.draw(_vec(p.dim))
    lhs = np.linalg.norm(f.gradient(x) - f.gradient(y))
    assert lhs <= p.L * np.linalg.norm(x - y) * (1 + 1e-12) + 1e-12
    mid = f.value(0.5 * (x + y))
    scale = max(1.0, abs(f.value(x)), abs(f.value(y)))
    assert mid <= 0.5 * (f.value(x) + f.value(y)) + 1e-12 * scale


prox_maps = [pb.L1Norm(0.7), pb.BoxIndicator(-1.0, 0.5)]


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(prox_maps), st.floats(0.01, 10.0), _vec(4), _vec(4), _vec(4))
def test_prox_nonexpansive_and_optimal(g, lam, y, y2, x):
    p, p2 = g.prox(lam, y), g.prox(lam, y2)
    assert np.linalg.norm(p - p2) <= np.linalg.norm(y - y2) * (1 + 1e-12) + 1e-15
    if isinstance(g, pb.BoxIndicator):
        x = np.clip(x, -1.0, 0.5)  # compare against feasible points only
    lhs = g.value(p) + np.sum((p - y) ** 2) / (2 * lam)
    rhs = g.value(x) + np.sum((x - y) ** 2) / (2 * lam)
    assert lhs <= rhs + 1e-12 * max(1.0, abs(rhs))


def test_box_indicator_outside_is_infinite():
    g = pb.BoxIndicator(-1.0, 1.0)
    assert g.value(np.array([0.0, 2.0])) == math.inf
    assert g.value(np.array([0.0, 1.0])) == 0.0


# ---------------------------------------------------------------- file I/O

@pytest.mark.parametrize("case", CASES)
def test_dump_load_round_trip(built, case, tmp_path):
    p = built[case]
    path = tmp_path / "p.txt"
    pb.dump_problem(p, path)
    q = pb.load_problem(path)
    assert (q.name, q.dim, q.L, q.optimal_value) == (p.name, p.dim, p.L, p.optimal_value)
    assert len(q.known_minimizers) == len(p.known_minimizers)
    for a, b in zip(q.known_minimizers, p.known_minimizers):
        assert np.array_equal(a, b)
    x = SplitMix64(2).normal(p.dim)
    assert q.objective(x) == p.objective(x)
    assert np.array_equal(q.gradient(x), p.gradient(x))


def test_dump_format_header():
    buf = io.StringIO()
    pb.dump_problem(pb.catalog("quadratic-degenerate", 2), buf)
    head, *rows = buf.getvalue().splitlines()
    assert head.startswith(pb.HEADER_TAG + " ")
    assert "blocks=A:2x2,minimizers:2x2" in head
    assert len(rows) == 4
    assert [float(v) for v in rows[0].split()] == [1.0, 0.0]


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("not a problem\n")
    with pytest.raises(ValueError):
        pb.load_problem(path)
