import numpy as np
import pytest

from swfem.quadrature import (gauss_legendre_01, monomial_integral,
                              triangle_quadrature)


@pytest.mark.parametrize("degree", range(1, 15))
def test_monomial_exactness(degree):
    rule = triangle_quadrature(degree)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            approx = np.sum(rule.weights * rule.points[:, 0] ** a
                            * rule.points[:, 1] ** b)
            exact = monomial_integral(a, b)
            assert approx == pytest.approx(exact, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("degree", range(1, 21))
def test_weights_positive_and_normalised(degree):
    rule = triangle_quadrature(degree)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-14)


def test_unit_integral():
    rule = triangle_quadrature(4)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)


def test_degree_one_is_centroid():
    rule = triangle_quadrature(1)
    assert len(rule.weights) == 1
    np.testing.assert_allclose(rule.points[0], [1 / 3, 1 / 3])
    # integrates x exactly: 1/6
    assert np.sum(rule.weights * rule.points[:, 0]) == pytest.approx(1 / 6)


def test_x2y2_factorial_oracle():
    # a! b! / (a+b+2)! = 2*2/720 = 1/180
    rule = triangle_quadrature(6)
    val = np.sum(rule.weights * rule.points[:, 0] ** 2
                 * rule.points[:, 1] ** 2)
    assert val == pytest.approx(1 / 180, rel=1e-14)


@pytest.mark.parametrize("degree", [0, -3, 99])
def test_unsupported_degree(degree):
    with pytest.raises(ValueError, match="unsupported quadrature degree"):
        triangle_quadrature(degree)


def test_interval_rule():
    x, w = gauss_legendre_01(4)
    assert np.all((x > 0) & (x < 1))
    # exact for degree 7 on [0, 1]
    assert np.sum(w * x ** 7) == pytest.approx(1 / 8, rel=1e-14)
