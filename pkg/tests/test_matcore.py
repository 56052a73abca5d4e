import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcrnorm.matcore import (
    RankDeficiencyWarning, as_matrix, default_rel_tolerance, estimate_rank, flipped_svd, holder_norm,
    least_squares, matrix_rank_report, right_divide, sign_flip, svd,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_as_matrix_rejects_nan_and_empty():
    with pytest.raises(ValueError, match=r"\(1, 0\)"):
        as_matrix([[1.0, 2.0], [np.nan, 1.0]])
    with pytest.raises(ValueError):
        as_matrix(np.zeros((0, 3)))
    assert as_matrix([1, 2, 3]).shape == (3, 1)


def test_svd_sign_convention_and_truncation():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((7, 5))
    r = svd(M)
    idx = np.argmax(np.abs(r.u), axis=0)
    assert np.all(r.u[idx, np.arange(5)] > 0)
    assert np.allclose(r.reconstruct(), M, atol=1e-12)
    r2 = svd(M, 2)
    assert r2.u.shape == (7, 2) and r2.v.shape == (5, 2)
    with pytest.raises(ValueError):
        svd(M, 6)


def test_svd_of_negated_matrix_has_same_left_vectors():
    M = np.array([[3.0, 1.0], [1.0, 2.0], [0.5, 4.0]])
    a, b = svd(M), svd(-M)
    assert np.allclose(a.u, b.u) and np.allclose(a.v, -b.v)


@pytest.mark.parametrize("p,expected", [(1, 7.0), (2, 5.0), (np.inf, 4.0)])
def test_holder_norm_values(p, expected):
    assert holder_norm([3.0, -4.0], p) == pytest.approx(expected)


def test_holder_norm_large_p_does_not_overflow():
    assert holder_norm([1e200, 1e200], 4) == pytest.approx(1e200 * 2 ** 0.25)
    with pytest.raises(ValueError):
        holder_norm([1.0], 0.5)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 12), elements=finite), st.floats(1, 8))
def test_holder_norm_between_max_and_l1(v, p):
    n = holder_norm(v, p)
    assert holder_norm(v, np.inf) <= n * (1 + 1e-12) + 1e-300
    assert n <= holder_norm(v, 1) * (1 + 1e-12) + 1e-300


def test_least_squares_full_rank_matches_numpy():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((10, 3))
    b = rng.standard_normal((10, 2))
    res = least_squares(a, b)
    assert not res.rank_deficient and res.rank == 3
    assert np.allclose(res.x, np.linalg.lstsq(a, b, rcond=None)[0])


def test_least_squares_rank_deficient_warns_and_gives_min_norm():
    a = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    b = np.array([2.0, 4.0, 6.0])
    with pytest.warns(RankDeficiencyWarning):
        res = least_squares(a, b)
    assert res.rank == 1 and res.rank_deficient
    assert np.allclose(res.x, [1.0, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        least_squares(a, b, warn=False)


def test_right_divide_solves_x_a_equals_b():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 8))
    x = rng.standard_normal((5, 3))
    assert np.allclose(right_divide(x @ a, a).x, x)


def test_estimate_rank_and_elbow():
    rep = estimate_rank([10.0, 5.0, 1.0, 1e-14, 1e-15])
    assert rep.estimated_rank == 3 and rep.elbow_index == 3
    assert rep.condition_number == pytest.approx(10.0)
    with pytest.raises(ValueError):
        estimate_rank([1.0, 2.0])
    assert default_rel_tolerance((4, 9)) == pytest.approx(9 * np.finfo(float).eps)


def test_matrix_rank_report_identity():
    assert matrix_rank_report(np.eye(6)).estimated_rank == 6
    assert matrix_rank_report(np.zeros((3, 3))).estimated_rank == 0


def test_sign_flip_makes_positive_data_have_positive_first_factor():
    rng = np.random.default_rng(3)
    D = rng.uniform(0.1, 1.0, (12, 9))
    X, V = flipped_svd(D, 2)
    assert np.all(X[:, 0] > 0) and np.all(V[:, 0] > 0)
    assert np.allclose(X @ V.T, svd(D, 2).reconstruct())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_sign_flip_is_invariant_to_input_signs(seed):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((8, 6))
    r = svd(D, 3)
    X, V = r.u * r.s, r.v
    flips = np.where(rng.random(3) < 0.5, -1.0, 1.0)
    a = sign_flip(X, V, D)
    b = sign_flip(X * flips, V * flips, D)
    assert np.allclose(a[0], b[0]) and np.allclose(a[1], b[1])
    assert np.allclose(a[0] @ a[1].T, X @ V.T)
