import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcbc.poly import (
    MonomialDict,
    PolyMatrix,
    Polynomial,
    build_dict,
    factor_C,
    gram_basis_matrix,
    gram_basis_scalar,
    gram_form,
    monomial_vector,
    monomials_upto,
)
from rcbc.system import BENCHMARKS, QUADRATIC_ORDER, nominal_benchmark

exps3 = st.tuples(*(st.integers(0, 3) for _ in range(3)))
coef = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
polys3 = st.dictionaries(exps3, coef, max_size=6).map(lambda d: Polynomial(3, d))
points3 = st.tuples(*(st.floats(-2, 2) for _ in range(3))).map(np.array)


# ---- dictionaries


def test_quadratic_dictionary_has_nine_expected_monomials():
    d = build_dict(3, 2)
    assert len(d) == 9
    assert set(d.entries) == set(QUADRATIC_ORDER)


def test_cubic_dictionary_has_19_entries():
    assert len(build_dict(3, 3)) == 19


def test_single_variable_degree_one():
    assert build_dict(1, 1).entries == ((1,),)


@pytest.mark.parametrize("n,d", [(1, 1), (2, 3), (3, 2), (3, 4), (4, 2)])
def test_dictionary_size_is_binomial(n, d):
    assert len(build_dict(n, d)) == math.comb(n + d, d) - 1
    assert len(build_dict(n, d, include_constant=True)) == math.comb(n + d, d)


def test_duplicate_monomial_rejected():
    with pytest.raises(ValueError):
        MonomialDict(2, ((1, 0), (1, 0)))


def test_lorenz_dictionary_at_123():
    M = nominal_benchmark("lorenz").dict_M.evaluate(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(M, [1, 2, 3, 2, 6, 3, 1, 4, 9])


# ---- C(x) factorisation


def test_linear_dictionary_factor_is_identity():
    C = factor_C(MonomialDict(3, ((1, 0, 0), (0, 1, 0), (0, 0, 1))))
    np.testing.assert_array_equal(C.evaluate(np.array([0.3, -2.0, 5.0])), np.eye(3))


def test_smallest_index_rule():
    C = factor_C(MonomialDict(2, ((1, 1),)))
    assert C.entries[0][0] == Polynomial.monomial((0, 1))
    assert C.entries[0][1].is_zero


@pytest.mark.parametrize("name", BENCHMARKS)
def test_C_times_x_is_M_symbolically(name):
    d = nominal_benchmark(name).dict_M
    C = factor_C(d)
    x = [Polynomial.monomial(tuple(int(i == k) for i in range(d.n_vars))) for k in range(d.n_vars)]
    M = monomial_vector(d)
    for r in range(len(d)):
        acc = Polynomial(d.n_vars)
        for c in range(d.n_vars):
            acc = acc + C.entries[r][c] * x[c]
        assert acc == M.entries[r][0]


@pytest.mark.parametrize("name", ["lorenz", "higher_degree"])
def test_C_times_x_at_random_points(name, rng):
    d = nominal_benchmark(name).dict_M
    C = factor_C(d)
    for x in rng.uniform(-5, 5, (100, 3)):
        want = d.evaluate(x)
        got = C.evaluate(x) @ x
        assert np.max(np.abs(got - want)) <= 1e-12 * max(np.max(np.abs(want)), 1.0)


def test_spacecraft_C_at_point():
    d = nominal_benchmark("spacecraft").dict_M
    x = np.array([0.3, -0.7, 1.1])
    np.testing.assert_allclose(factor_C(d).evaluate(x) @ x, d.evaluate(x), rtol=1e-14)


# ---- polynomial algebra


@given(polys3)
def test_additive_identity(p):
    assert p + Polynomial(3) == p


@settings(max_examples=50)
@given(polys3, polys3, points3)
def test_product_evaluates_pointwise(p, q, x):
    assert np.isclose((p * q)(x), p(x) * q(x), rtol=1e-9, atol=1e-6)


@settings(max_examples=50)
@given(polys3, polys3, points3)
def test_sum_evaluates_pointwise(p, q, x):
    assert np.isclose((p + q)(x), p(x) + q(x), rtol=1e-12, atol=1e-9)


def test_json_round_trip(rng):
    coeffs = {e: rng.standard_normal((2, 3)) for e in monomials_upto(3, 2)}
    K = PolyMatrix.from_coeffs(3, coeffs)
    back = PolyMatrix.from_json(3, K.to_json())
    assert back.allclose(K, rtol=0.0)


# ---- Gram bases


@pytest.mark.parametrize("n,deg,size", [(3, 2, 4), (3, 4, 10), (1, 2, 2)])
def test_scalar_gram_basis_size(n, deg, size):
    assert len(gram_basis_scalar(n, deg)) == size


def test_scalar_gram_basis_univariate_quadratic():
    assert gram_basis_scalar(1, 2).monomials == ((0,), (1,))


def test_odd_scalar_degree_rejected():
    with pytest.raises(ValueError):
        gram_basis_scalar(3, 3)


@pytest.mark.parametrize("dim,n,deg,size", [(16, 3, 2, 64), (28, 3, 2, 112), (2, 1, 0, 2)])
def test_matrix_gram_basis_size(dim, n, deg, size):
    b = gram_basis_matrix(dim, n, deg)
    assert len(b) == size
    assert len(b) == dim * math.comb(n + math.ceil(deg / 2), math.ceil(deg / 2))


def test_constant_matrix_basis_is_aux_only():
    b = gram_basis_matrix(2, 1, 0)
    assert b.aux == (0, 1)
    assert b.monomials == ((0,), (0,))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_gram_form_matches_quadratic_form(seed):
    r = np.random.default_rng(seed)
    basis = gram_basis_matrix(3, 2, 2)
    L = r.standard_normal((len(basis), len(basis)))
    G = L @ L.T
    N = gram_form(G, basis)
    x, y = r.standard_normal(2), r.standard_normal(3)
    z = np.concatenate([y[a] * np.prod(x ** np.array(m)) * np.ones(1)
                        for a, m in zip(basis.aux, basis.monomials)])
    assert np.isclose(y @ N.evaluate(x) @ y, z @ G @ z, rtol=1e-10)
    # a PSD Gram matrix gives a PSD polynomial matrix everywhere
    assert np.linalg.eigvalsh(N.evaluate(x)).min() >= -1e-9 * np.abs(G).max()
