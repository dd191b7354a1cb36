"""Gauss-Legendre collocation machinery on the unit interval (0,1).

All element-local operators of the solver are built from the 1-D objects
here and applied axis by axis (tensor-product structure), so no explicit
d-dimensional operator is ever stored.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

MAX_ORDER = 9

_NEWTON_TOL = 1e-15


def _legendre_and_derivative(n, x):
    """Evaluate the degree-n Legendre polynomial and its derivative on (-1,1)."""
    p_prev = np.ones_like(x)
    p = x.copy()
    if n == 0:
        return p_prev, np.zeros_like(x)
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def _gauss_legendre_unit(n):
    """Nodes and weights of the n-point Gauss-Legendre rule mapped to (0,1).

    Newton iteration on the Legendre recurrence with Chebyshev initial
    guesses; converges to machine precision in a handful of steps.
    """
    if n == 1:
        return np.array([0.5]), np.array([1.0])
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    p, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # map (-1,1) -> (0,1); weights then sum to 1
    return 0.5 * (x + 1.0), 0.5 * w


def lagrange_eval(nodes, points):
    """Matrix L with L[i, j] = ell_j(points[i]) for the Lagrange basis on nodes."""
    nodes = np.asarray(nodes, dtype=float)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    n = nodes.size
    L = np.ones((points.size, n))
    for j in range(n):
        for k in range(n):
            if k == j:
                continue
            L[:, j] *= (points - nodes[k]) / (nodes[j] - nodes[k])
    return L


@dataclass(frozen=True)
class Basis1D:
    """Collocation data for order p on the unit interval.

    diff[i, j] is the derivative of Lagrange polynomial j at node i;
    integ[i, k] integrates polynomial k from 0 to node i (used by the
    predictor's Picard fixed point).  left/right evaluate at 0 and 1.
    """

    p: int
    nodes: np.ndarray
    weights: np.ndarray
    diff: np.ndarray
    left: np.ndarray
    right: np.ndarray
    integ: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.p + 1


def make_basis(p):
    """Build the full Basis1D for polynomial order p (0 <= p <= 9)."""
    if not isinstance(p, (int, np.integer)) or not 0 <= p <= MAX_ORDER:
        raise ConfigurationError(f"order p must be an integer in [0, {MAX_ORDER}], got {p!r}")
    n = p + 1
    nodes, weights = _gauss_legendre_unit(n)

    # differentiation matrix from barycentric weights; rows sum to zero
    bary = np.ones(n)
    for j in range(n):
        for k in range(n):
            if k != j:
                bary[j] /= nodes[j] - nodes[k]
    diff = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                diff[i, j] = (bary[j] / bary[i]) / (nodes[i] - nodes[j])
        diff[i, i] = -np.sum(diff[i, :])

    left = lagrange_eval(nodes, 0.0)[0]
    right = lagrange_eval(nodes, 1.0)[0]

    # integ[i, k] = int_0^{nodes[i]} ell_k, via an n-point Gauss rule on
    # (0, nodes[i]) -- exact since deg(ell_k) = p <= 2n - 1
    integ = np.zeros((n, n))
    for i in range(n):
        sub = nodes * nodes[i]
        integ[i, :] = nodes[i] * (weights @ lagrange_eval(nodes, sub))

    return Basis1D(p=p, nodes=nodes, weights=weights, diff=diff,
                   left=left, right=right, integ=integ)


def gauss_legendre(p):
    """Nodes and weights of the collocation rule for order p."""
    b = make_basis(p)
    return b.nodes, b.weights


def derivative_matrix(basis):
    """D[i, j] = ell_j'(nodes[i]); exact for polynomials of degree <= p."""
    return basis.diff


def extrapolation_vectors(basis):
    """(left, right) evaluation vectors of the Lagrange expansion at 0 and 1."""
    return basis.left, basis.right


def time_collapse_weights(basis):
    """Quadrature weights that collapse a nodal time polynomial to its
    integral over the unit time interval (multiply by the step size
    downstream).  Exact for integrands of degree <= 2p+1."""
    return basis.weights


def apply_matrix(mat, arr, axis):
    """Apply a 1-D operator along one axis of a tensor-product array."""
    return np.moveaxis(np.tensordot(mat, arr, axes=(1, axis)), 0, axis)
