"""Numerical integration rules on the reference triangle.

The reference triangle has vertices (0,0), (1,0), (0,1) and area 1/2.
Rules are exact for all monomials x^a y^b with a+b <= degree, for which
the reference integral has the closed form a! b! / (a+b+2)!.

Low degrees use classical symmetric point sets; higher degrees fall back
to a collapsed (Duffy) tensor product of Gauss-Legendre rules, which has
positive weights at any order.
"""

from dataclasses import dataclass

import numpy as np

MAX_DEGREE = 40


@dataclass(frozen=True)
class QuadratureRule:
    """Points (n, 2) and weights (n,) on the reference triangle."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        if abs(self.weights.sum() - 0.5) > 1e-13:
            raise ValueError("triangle quadrature weights must sum to 1/2")


# Degree 2, 3-point symmetric rule (edge midpoints of the medial triangle).
_MIDPOINT3 = (
    np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]]),
    np.array([1 / 6, 1 / 6, 1 / 6]),
)


def gauss_legendre_01(n):
    """n-point Gauss-Legendre rule on [0, 1]; exact to degree 2n-1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _collapsed_rule(degree):
    # Duffy map (s, t) -> (s (1 - t), t) sends the unit square to the
    # triangle with Jacobian (1 - t).  A monomial of total degree d pulls
    # back to degree <= d in s and <= d + 1 in t (Jacobian included), so
    # m Gauss points per direction suffice when 2m - 1 >= d + 1.
    m = (degree + 3) // 2
    xs, ws = gauss_legendre_01(m)
    s, t = np.meshgrid(xs, xs, indexing="ij")
    wgt = np.outer(ws, ws * (1.0 - xs))
    pts = np.column_stack([(s * (1.0 - t)).ravel(), t.ravel()])
    return pts, wgt.ravel()


def triangle_quadrature(degree):
    """Return a QuadratureRule exact for total polynomial degree `degree`.

    All weights are positive.  Raises ValueError for unsupported degrees.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree!r}; "
                         f"expected 1 <= degree <= {MAX_DEGREE}")
    if degree == 1:
        pts = np.array([[1 / 3, 1 / 3]])
        wts = np.array([0.5])
    elif degree == 2:
        pts, wts = _MIDPOINT3
    else:
        pts, wts = _collapsed_rule(degree)
    return QuadratureRule(points=pts, weights=wts.copy(), degree=degree)


def monomial_integral(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)
