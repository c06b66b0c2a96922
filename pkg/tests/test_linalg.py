from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carreg.errors import InsufficientData, InvalidInput, SingularBin
from carreg.linalg import gram, guarded_ols
from oracles import gram_double_loop, inverse_cofactor, ols_normal_equations


def test_gram_orthogonal_columns():
    g = gram([[1, 0], [0, 1], [1, 0], [0, 1]])
    np.testing.assert_array_equal(g, [[0.5, 0], [0, 0.5]])


def test_gram_rank_one():
    np.testing.assert_array_equal(gram([[1, 2]]), [[1, 2], [2, 4]])


def test_gram_matches_double_loop():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(5, 3))
    np.testing.assert_allclose(gram(x), gram_double_loop(x.tolist()), atol=1e-12, rtol=0)


def test_gram_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        gram([[1.0, np.nan]])


def test_exact_linear_data():
    x = np.column_stack([np.ones(3), [0.0, 1.0, 2.0]])
    fit = guarded_ols(x, [2.0, 5.0, 8.0])
    np.testing.assert_allclose(fit.coefficients, [2.0, 3.0], atol=1e-12)
    assert fit.residual_sum_squares == pytest.approx(0.0, abs=1e-20)


def test_identical_rows_are_singular():
    with pytest.raises(SingularBin) as info:
        guarded_ols([[1, 4], [1, 4]], [1.0, 2.0])
    assert info.value.details["determinant"] <= 1e-8


def test_fewer_rows_than_columns():
    with pytest.raises(InsufficientData):
        guarded_ols([[1, 2, 3]], [1.0])


def test_matches_cofactor_oracle():
    rng = np.random.default_rng(11)
    x = np.column_stack([np.ones(8), rng.normal(size=(8, 2))])
    y = rng.normal(size=8)
    fit = guarded_ols(x, y)
    np.testing.assert_allclose(fit.coefficients, ols_normal_equations(x.tolist(), y.tolist()), atol=1e-9)
    g = gram_double_loop(x.tolist())
    np.testing.assert_allclose(fit.inverse_gram, inverse_cofactor(g), atol=1e-9)


def test_guard_is_scale_free_in_rows():
    # the same design repeated k times has the same normalized Gram
    rng = np.random.default_rng(5)
    x = np.column_stack([np.ones(6), rng.normal(size=6)])
    y = rng.normal(size=6)
    d1 = guarded_ols(x, y).gram_determinant
    d4 = guarded_ols(np.tile(x, (4, 1)), np.tile(y, 4)).gram_determinant
    assert d4 == pytest.approx(d1, rel=1e-10)


def test_threshold_is_configurable():
    # normalized Gram determinant is the population variance of x, 1.25e-10
    x = np.column_stack([np.ones(4), [0.0, 1e-5, 2e-5, 3e-5]])
    y = [1.0, 2.0, 3.0, 4.0]
    with pytest.raises(SingularBin) as info:
        guarded_ols(x, y)
    assert info.value.details["determinant"] == pytest.approx(1.25e-10, rel=1e-6)
    fit = guarded_ols(x, y, det_threshold=1e-11)
    np.testing.assert_allclose(fit.coefficients, [1.0, 1e5], rtol=1e-6)


designs = st.integers(min_value=0, max_value=2**32 - 1).flatmap(
    lambda seed: st.tuples(st.just(seed), st.integers(2, 4), st.integers(0, 8))
)


def _random_problem(seed, cols, extra):
    rng = np.random.default_rng(seed)
    rows = cols + 1 + extra
    x = np.column_stack([np.ones(rows), rng.normal(size=(rows, cols - 1))])
    y = rng.normal(size=rows)
    return rng, x, y


@settings(max_examples=60, deadline=None)
@given(designs)
def test_residuals_orthogonal_to_design(problem):
    _, x, y = _random_problem(*problem)
    try:
        fit = guarded_ols(x, y)
    except SingularBin:
        return
    np.testing.assert_allclose(x.T @ (y - x @ fit.coefficients), 0.0, atol=1e-9)
    assert fit.residual_sum_squares >= 0


@settings(max_examples=60, deadline=None)
@given(designs)
def test_row_permutation_invariance(problem):
    rng, x, y = _random_problem(*problem)
    try:
        a = guarded_ols(x, y)
    except SingularBin:
        return
    perm = rng.permutation(len(y))
    b = guarded_ols(x[perm], y[perm])
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(designs)
def test_inverse_gram_inverts_gram(problem):
    _, x, y = _random_problem(*problem)
    try:
        fit = guarded_ols(x, y)
    except SingularBin:
        return
    np.testing.assert_allclose(fit.inverse_gram @ gram(x), np.eye(x.shape[1]), atol=1e-8)
    np.testing.assert_allclose(fit.inverse_gram, fit.inverse_gram.T, rtol=1e-10, atol=0)
