from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochclifford.algebra import (
    MAX_DIM,
    AlgebraError,
    Multivector,
    ParaVector,
    blade_product,
    blade_product_bruteforce,
    clifford_inner_product,
    conjugate,
    geometric_product,
    left_unit_product,
    mv_mul,
    para_norm,
    right_unit_product,
    sc,
    sign_table,
    vec,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def multivectors(n):
    return st.lists(finite, min_size=1 << n, max_size=1 << n).map(lambda c: Multivector(n, c))


def paravectors(n):
    return st.lists(finite, min_size=n + 1, max_size=n + 1).map(lambda c: Multivector.from_paravector(c))


# --- blade products --------------------------------------------------------


@pytest.mark.parametrize("n", range(1, 7))
def test_sign_table_matches_bubble_sort_oracle(n):
    table = sign_table(n)
    for a in range(1 << n):
        for b in range(1 << n):
            assert blade_product(a, b, n) == blade_product_bruteforce(a, b, n)
            assert table[a, b] == blade_product_bruteforce(a, b, n)[0]


def test_blade_product_examples():
    # e1 e2 = e12, e2 e1 = -e12, e1 e1 = -1, e12 e12 = -1
    assert blade_product(0b01, 0b10, 2) == (1, 0b11)
    assert blade_product(0b10, 0b01, 2) == (-1, 0b11)
    assert blade_product(0b01, 0b01, 2) == (-1, 0)
    assert blade_product(0b11, 0b11, 2) == (-1, 0)
    # e12 e1 = e1 e2 e1 = -e1 e1 e2 = e2
    assert blade_product(0b11, 0b01, 2) == (1, 0b10)


def test_blade_product_rejects_out_of_range():
    with pytest.raises(AlgebraError):
        blade_product(4, 1, 2)
    with pytest.raises(AlgebraError):
        Multivector.zero(MAX_DIM + 1)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_generators_anticommute(n):
    gens = [Multivector.basis(n, k) for k in range(1, n + 1)]
    for j, ej in enumerate(gens):
        for k, ek in enumerate(gens):
            expected = Multivector.scalar(n, -2.0 if j == k else 0.0)
            assert ej * ek + ek * ej == expected


@pytest.mark.parametrize("n", range(1, 7))
def test_geometric_product_matches_blade_expansion(n):
    rng = np.random.default_rng(n)
    x = rng.normal(size=(5, 1 << n))
    y = rng.normal(size=(5, 1 << n))
    ref = np.zeros_like(x)
    for a in range(1 << n):
        for b in range(1 << n):
            s, c = blade_product_bruteforce(a, b, n)
            ref[:, c] += s * x[:, a] * y[:, b]
    np.testing.assert_allclose(geometric_product(x, y), ref, atol=1e-12)


def test_geometric_product_broadcasts():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 1, 8))
    y = rng.normal(size=(4, 8))
    out = geometric_product(x, y)
    assert out.shape == (3, 4, 8)
    np.testing.assert_allclose(out[2, 1], geometric_product(x[2, 0], y[1]))


def test_unit_products_agree_with_full_product():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(6, 8))
    for k in range(4):
        ek = Multivector.basis(3, k).coeffs
        np.testing.assert_allclose(left_unit_product(k, x), geometric_product(ek, x), atol=1e-14)
        np.testing.assert_allclose(right_unit_product(x, k), geometric_product(x, ek), atol=1e-14)


# --- algebra laws ----------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(multivectors(n), multivectors(n), multivectors(n))))
def test_product_is_associative(xyz):
    x, y, z = xyz
    lhs = ((x * y) * z).coeffs
    rhs = (x * (y * z)).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(lhs).max()))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(multivectors(n), multivectors(n))))
def test_conjugation_reverses_products(xy):
    x, y = xy
    lhs = conjugate(x * y).coeffs
    rhs = (conjugate(y) * conjugate(x)).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(lhs).max()))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5).flatmap(multivectors))
def test_conjugation_is_an_involution(x):
    assert conjugate(conjugate(x)) == x


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5).flatmap(paravectors))
def test_paravector_times_conjugate_is_norm_squared(x):
    prod = x * conjugate(x)
    assert prod.is_paravector(atol=1e-9)
    assert sc(prod) == pytest.approx(para_norm(x) ** 2, rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(prod.coeffs[1:], 0.0, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(multivectors(n), multivectors(n), finite)))
def test_product_is_bilinear(xya):
    x, y, a = xya
    lhs = (x * (a * y + x)).coeffs
    rhs = (a * (x * y) + x * x).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-8 * (1 + np.abs(rhs).max()))


def test_conjugation_signs_by_grade():
    # conj(e_A) = (-1)^{g(g+1)/2} e_A
    n = 3
    expected = {0: 1, 1: -1, 2: -1, 3: 1}
    for bits in range(1 << n):
        g = bin(bits).count("1")
        assert conjugate(Multivector.blade(n, bits)) == expected[g] * Multivector.blade(n, bits)


def test_sc_and_vec_parts():
    x = Multivector(2, [1.5, -2.0, 3.0, 4.0])
    assert sc(x) == 1.5
    assert vec(x) == Multivector(2, [0.0, -2.0, 3.0, 0.0])


def test_para_norm_examples():
    assert para_norm(Multivector.from_paravector([3.0, 4.0])) == 5.0
    assert para_norm(np.array([1.0, 2.0, 2.0])) == 3.0
    assert para_norm(Multivector.zero(3)) == 0.0


# --- inner product ---------------------------------------------------------


def test_inner_product_of_unit_with_itself():
    one = Multivector.scalar(2)
    assert clifford_inner_product([one], [one], [1.0]) == one


def test_inner_product_is_right_linear_and_conjugate_left():
    rng = np.random.default_rng(3)
    f = [Multivector(2, rng.normal(size=4)) for _ in range(4)]
    g = [Multivector(2, rng.normal(size=4)) for _ in range(4)]
    w = rng.uniform(0.1, 1.0, size=4)
    lam = Multivector(2, rng.normal(size=4))
    ip = clifford_inner_product(f, g, w)
    right = clifford_inner_product(f, [gi * lam for gi in g], w)
    np.testing.assert_allclose(right.coeffs, (ip * lam).coeffs, atol=1e-12)
    swapped = clifford_inner_product(g, f, w)
    np.testing.assert_allclose(swapped.coeffs, conjugate(ip).coeffs, atol=1e-12)


def test_inner_product_positive_scalar_part():
    rng = np.random.default_rng(4)
    f = [Multivector(3, rng.normal(size=8)) for _ in range(5)]
    w = rng.uniform(0.1, 1.0, size=5)
    ip = clifford_inner_product(f, f, w)
    assert sc(ip) == pytest.approx(sum(wi * fi.norm() ** 2 for wi, fi in zip(w, f)))


@pytest.mark.parametrize("args", [
    ([Multivector.scalar(2)], [Multivector.scalar(2)], [1.0, 2.0]),
    ([Multivector.scalar(2)], [Multivector.scalar(2)], [-1.0]),
    ([], [], []),
    ([Multivector.scalar(2)], [Multivector.scalar(3)], [1.0]),
])
def test_inner_product_rejects_bad_input(args):
    with pytest.raises(AlgebraError):
        clifford_inner_product(*args)


# --- value objects ---------------------------------------------------------


def test_multivector_is_immutable():
    x = Multivector.scalar(2)
    with pytest.raises(AttributeError):
        x.dim = 3
    with pytest.raises(ValueError):
        x.coeffs[0] = 2.0


def test_multivector_rejects_nonfinite_and_wrong_length():
    with pytest.raises(AlgebraError):
        Multivector(2, [1.0, np.nan, 0.0, 0.0])
    with pytest.raises(AlgebraError):
        Multivector(2, [1.0, 2.0, 3.0])


def test_mixed_dimensions_raise():
    with pytest.raises(AlgebraError):
        mv_mul(Multivector.scalar(2), Multivector.scalar(3))
    with pytest.raises(AlgebraError):
        Multivector.scalar(2) + Multivector.scalar(3)


def test_json_round_trip():
    x = Multivector(3, [0.5, 0.0, -1.25, 0.0, 0.0, 3.0, 0.0, 1e-300])
    text = x.to_json()
    assert json.loads(text)["coeffs"] == {"0": 0.5, "2": -1.25, "5": 3.0, "7": 1e-300}
    assert Multivector.from_json(text) == x


def test_from_dict_rejects_bad_blade():
    with pytest.raises(AlgebraError):
        Multivector.from_dict({"dim": 2, "coeffs": {"9": 1.0}})


def test_paravector_value_object():
    p = ParaVector([1.0, 2.0, 3.0])
    assert p.dim == 2
    assert p.to_multivector() == Multivector(2, [1.0, 2.0, 3.0, 0.0])
    assert para_norm(np.asarray(p)) == pytest.approx(np.sqrt(14.0))
    with pytest.raises(AlgebraError):
        ParaVector([1.0])
