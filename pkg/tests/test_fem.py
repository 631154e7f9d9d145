from itertools import product
from math import comb, factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isodg.errors import UnsupportedDegree
from isodg.fem import (MAX_EXACTNESS, basis_eval, basis_grad, face_quadrature, facet_bary_rule,
                       reference_element, reference_face_measure, reference_vertices,
                       simplex_monomial_integral, volume_quadrature)

from conftest import random_simplex_points


def exponents(d, p):
    return [e for e in product(range(p + 1), repeat=d) if sum(e) <= p]


def dirichlet_moment(a):
    """Mean of prod b_i^a_i over a (len(a)-1)-simplex in barycentric coordinates."""
    m = len(a) - 1
    return factorial(m) * np.prod([factorial(x) for x in a]) / factorial(sum(a) + m)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("k", [0, 1, 2, 3, 4])
def test_kronecker_and_partition_of_unity(d, k, rng):
    ref = reference_element(d, k)
    assert ref.n == comb(k + d, d)
    np.testing.assert_allclose(ref.eval(ref.nodes), np.eye(ref.n), atol=1e-12)
    x = random_simplex_points(rng, d, 50)
    np.testing.assert_allclose(ref.eval(x).sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(ref.grad(x).sum(axis=1), 0.0, atol=1e-10)


def test_linear_triangle_values_and_gradients():
    ref = reference_element(2, 1)
    np.testing.assert_allclose(basis_eval(ref, [1 / 3, 1 / 3]), [1 / 3] * 3, atol=1e-15)
    np.testing.assert_allclose(basis_grad(ref, [0.2, 0.3]), [[-1, -1], [1, 0], [0, 1]], atol=1e-14)


@pytest.mark.parametrize("d", [2, 3])
def test_quadratic_gradient_matches_finite_differences(d, rng):
    ref = reference_element(d, 2)
    x = random_simplex_points(rng, d, 5) * 0.9 + 0.02
    h = 1e-6
    for p in x:
        g = basis_grad(ref, p)
        for a in range(d):
            e = np.zeros(d)
            e[a] = h
            fd = (basis_eval(ref, p + e) - basis_eval(ref, p - e)) / (2 * h)
            np.testing.assert_allclose(g[:, a], fd, atol=1e-7)


@pytest.mark.parametrize("d,k", [(2, 1), (2, 2), (2, 3), (2, 4), (3, 2), (3, 3)])
def test_nodal_interpolation_reproduces_polynomials(d, k, rng):
    ref = reference_element(d, k)
    x = random_simplex_points(rng, d, 20)
    for e in exponents(d, k):
        f = lambda y: np.prod(y ** np.array(e), axis=-1)  # noqa: E731
        np.testing.assert_allclose(ref.eval(x) @ f(ref.nodes), f(x), atol=1e-10)


def test_reference_measures():
    assert volume_quadrature(2, 1).weights.sum() == pytest.approx(0.5, abs=1e-15)
    assert volume_quadrature(3, 1).weights.sum() == pytest.approx(1 / 6, abs=1e-15)
    rule = volume_quadrature(2, 2)
    assert rule.weights @ rule.points[:, 0] == pytest.approx(1 / 6, abs=1e-15)
    assert reference_face_measure(2, 0) == pytest.approx(np.sqrt(2))
    assert reference_face_measure(3, 0) == pytest.approx(np.sqrt(3) / 2)


@pytest.mark.parametrize("d", [2, 3])
def test_volume_rules_positive_inside(d):
    for ex in range(0, 13):
        rule = volume_quadrature(d, ex)
        assert np.all(rule.weights > 0)
        assert np.all(rule.points >= 0) and np.all(rule.points.sum(axis=1) <= 1)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("ex", [0, 3, 6, 10])
def test_volume_rules_integrate_monomials(d, ex):
    rule = volume_quadrature(d, ex)
    for e in exponents(d, ex):
        exact = simplex_monomial_integral(e)
        got = rule.weights @ np.prod(rule.points ** np.array(e), axis=1)
        assert abs(got - exact) <= 1e-12 * exact


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("ex", [1, 4, 7, 11])
def test_facet_rules_integrate_barycentric_monomials(d, ex):
    bary, w = facet_bary_rule(d, ex)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    for a in product(range(ex + 1), repeat=d):
        if sum(a) > ex:
            continue
        got = w @ np.prod(bary ** np.array(a), axis=1)
        assert abs(got - dirichlet_moment(a)) <= 1e-12 * dirichlet_moment(a)


@pytest.mark.parametrize("d", [2, 3])
def test_face_rule_points_lie_on_face(d):
    verts = reference_vertices(d)
    for face in range(d + 1):
        rule = face_quadrature(d, 5, face)
        assert rule.weights.sum() == pytest.approx(reference_face_measure(d, face), rel=1e-14)
        lam = np.column_stack([1 - rule.points.sum(axis=1), rule.points])
        np.testing.assert_allclose(lam[:, face], 0.0, atol=1e-15)
        assert verts.shape == (d + 1, d)


def test_face_rule_integrates_edge_monomial():
    # hypotenuse of the triangle, x = 1 - t, y = t, ds = sqrt(2) dt
    rule = face_quadrature(2, 6, 0)
    got = rule.weights @ (rule.points[:, 0] ** 2 * rule.points[:, 1] ** 3)
    assert got == pytest.approx(np.sqrt(2) * factorial(2) * factorial(3) / factorial(6), rel=1e-13)


def test_unsupported_exactness():
    with pytest.raises(UnsupportedDegree):
        volume_quadrature(3, MAX_EXACTNESS[3] + 1)
    with pytest.raises(UnsupportedDegree):
        reference_element(2, 7)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(0, 4), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.floats(0.0, 1.0))
def test_partition_of_unity_property(d, k, a, b, c):
    p = np.array([a, b, c][:d])
    s = p.sum()
    if s > 1:
        p = p / s
    assert basis_eval(reference_element(d, k), p).sum() == pytest.approx(1.0, abs=1e-12)
