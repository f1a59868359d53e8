from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochclifford.algebra import Multivector, geometric_product
from stochclifford.fields import (
    REGISTRY,
    CliffordField,
    DomainError,
    abs2_field,
    constant_field,
    coordinate_field,
    cr_apply,
    cr_conj_apply,
    cr_field,
    cr_values,
    dirac_apply,
    fd_laplacian,
    fueter_product,
    fueter_variable,
    get_fixture,
    mean_value_check,
    monogenicity_check,
    partials,
)

coords = st.floats(-1.5, 1.5, allow_nan=False)


def points(n, count=20, seed=0):
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(count, n + 1))


def test_fueter_variable_values():
    z = fueter_variable(1, 2)
    val = z([0.3, 0.7, -0.2])
    # z1 = x1 - x0 e1
    assert val == Multivector(2, [0.7, -0.3, 0.0, 0.0])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_fueter_variables_are_left_and_right_monogenic(n):
    for k in range(1, n + 1):
        z = fueter_variable(k, n)
        for side in ("left", "right"):
            assert monogenicity_check(z, points(n), side=side, tol=1e-8).passed


@pytest.mark.parametrize("ks, n", [([1, 1], 2), ([1, 2], 2), ([1, 2], 3), ([1, 2, 3], 3), ([2, 2, 3], 3)])
def test_fueter_products_are_monogenic(ks, n):
    f = fueter_product(ks, n)
    pts = points(n, seed=len(ks))
    analytic = monogenicity_check(f, pts, method="analytic", tol=1e-10)
    assert analytic.passed, analytic.max_residual
    fd = monogenicity_check(f, pts, h=1e-3, method="fd", tol=1e-5)
    assert fd.passed, fd.max_residual


def test_fueter_product_is_symmetrised():
    n = 2
    x = points(n, 5)
    z1, z2 = fueter_variable(1, n).values(x), fueter_variable(2, n).values(x)
    expected = 0.5 * (geometric_product(z1, z2) + geometric_product(z2, z1))
    np.testing.assert_allclose(fueter_product([1, 2], n).values(x), expected, atol=1e-14)


@pytest.mark.parametrize("ks", [[1], [1, 2], [1, 2, 2]])
def test_analytic_partials_match_finite_differences(ks):
    f = fueter_product(ks, 3)
    x = points(3, 10, seed=7)
    np.testing.assert_allclose(partials(f, x, method="analytic"), partials(f, x, h=1e-5, method="fd"),
                               atol=1e-8)


def test_analytic_hessian_matches_finite_differences():
    f = fueter_product([1, 2, 3], 3)
    x = points(3, 4, seed=2)
    h = 1e-4
    eye = np.eye(4) * h
    fd = (f.gradient(x[:, None, :] + eye) - f.gradient(x[:, None, :] - eye)) / (2 * h)
    np.testing.assert_allclose(f.hessian(x), fd, atol=1e-7)


def test_jet_values_agree_with_separate_calls():
    f = fueter_product([1, 2], 2)
    x = points(2, 6, seed=3)
    v, g, h = f.jet_values(x)
    np.testing.assert_allclose(v, f.values(x))
    np.testing.assert_allclose(np.broadcast_to(g, f.gradient(x).shape), f.gradient(x))
    np.testing.assert_allclose(np.broadcast_to(h, f.hessian(x).shape), f.hessian(x))


def test_coordinate_fields_are_not_monogenic():
    n = 2
    assert cr_apply(coordinate_field(0, n), [0.1, 0.2, 0.3]) == Multivector.scalar(n, 1.0)
    assert cr_apply(coordinate_field(1, n), [0.1, 0.2, 0.3]) == Multivector.basis(n, 1)
    assert not monogenicity_check(coordinate_field(0, n), points(n)).passed
    assert not monogenicity_check(abs2_field(n), points(n)).passed


def test_conjugate_operator_on_z():
    # Dbar z_k = d0 z_k - Dx z_k = -e_k - e_k^2 = -2 e_k
    n = 2
    out = cr_conj_apply(fueter_variable(1, n), [0.1, 0.2, 0.3])
    np.testing.assert_allclose(out.coeffs, (-2.0 * Multivector.basis(n, 1)).coeffs, atol=1e-9)


def test_dirac_of_linear_field():
    n = 2
    out = dirac_apply(coordinate_field(2, n), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(out.coeffs, Multivector.basis(n, 2).coeffs, atol=1e-10)


def test_dbar_d_is_laplacian():
    n = 2
    f = abs2_field(n)
    x = np.array([[0.2, -0.1, 0.4]])
    composed = cr_values(cr_field(f, h=1e-3), x, h=1e-3, method="fd", conj=True)
    np.testing.assert_allclose(composed[0], fd_laplacian(f, x)[0], atol=1e-5)
    np.testing.assert_allclose(fd_laplacian(f, x)[0, 0], 2 * (n + 1), atol=1e-6)


def test_constant_field_has_zero_derivatives():
    c = constant_field(Multivector(2, [1.0, 2.0, 3.0, 4.0]))
    assert monogenicity_check(c, points(2), tol=0.0).passed
    np.testing.assert_array_equal(fd_laplacian(c, points(2)), 0.0)


def test_domain_box_is_enforced():
    f = CliffordField(1, lambda x: np.zeros(x.shape[:-1] + (2,)), lo=(0.0, 0.0), hi=(1.0, 1.0))
    with pytest.raises(DomainError):
        f.values(np.array([2.0, 0.5]))
    with pytest.raises(DomainError):
        f.values(np.array([-0.5, 0.5]))


def test_bad_point_shape_raises():
    with pytest.raises(Exception):
        fueter_variable(1, 2).values(np.zeros(2))


def test_monogenicity_check_needs_points():
    with pytest.raises(ValueError):
        monogenicity_check(fueter_variable(1, 1), np.zeros((0, 2)))


def test_nonpositive_step_rejected():
    with pytest.raises(ValueError):
        partials(coordinate_field(1, 1), [0.0, 0.0], h=0.0, method="fd")


def test_monogenicity_is_chunk_independent():
    f = fueter_product([1, 2], 2)
    pts = points(2, 50, seed=9)
    assert monogenicity_check(f, pts, chunk=7).max_residual == monogenicity_check(f, pts).max_residual


@settings(max_examples=30, deadline=None)
@given(st.tuples(coords, coords, coords))
def test_z1z2_monogenic_everywhere(x):
    f = fueter_product([1, 2], 2)
    r = cr_values(f, np.array(x), method="analytic")
    assert np.linalg.norm(r) < 1e-12


@pytest.mark.parametrize("name", ["z1", "z1z2", "x1"])
def test_harmonic_fixtures_satisfy_mean_value(name):
    f = get_fixture(name, 2)
    res = mean_value_check(f, [0.1, -0.2, 0.3], 0.5, 20000, rng_seed=1)
    assert res.gap <= 4.0 * res.stderr + 1e-12


def test_abs2_violates_mean_value():
    res = mean_value_check(abs2_field(2), [0.0, 0.0, 0.0], 1.0, 2000)
    # sphere average of |x|^2 is r^2 = 1, centre value 0
    assert res.gap == pytest.approx(1.0)


def test_mean_value_rejects_bad_input():
    with pytest.raises(ValueError):
        mean_value_check(fueter_variable(1, 1), [0.0, 0.0], 0.0, 10)
    with pytest.raises(ValueError):
        mean_value_check(fueter_variable(1, 1), [0.0, 0.0], 1.0, 0)


def test_registry_flags_agree_with_checks():
    for name, fx in REGISTRY.items():
        n = max(fx.min_dim, 2)
        f = get_fixture(name, n)
        method = "analytic" if f.grad is not None else "fd"
        assert monogenicity_check(f, points(n), method=method).passed == fx.monogenic, name


def test_get_fixture_errors():
    with pytest.raises(KeyError):
        get_fixture("nope", 2)
    with pytest.raises(ValueError):
        get_fixture("z3", 2)
