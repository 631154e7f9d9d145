"""
Reference simplex machinery: nodal Lagrange bases and quadrature.

The reference triangle is ``(0,0), (1,0), (0,1)`` and the reference
tetrahedron ``(0,0,0), (1,0,0), (0,1,0), (0,0,1)``.  Local face ``i`` is the
face opposite local vertex ``i``.

Examples
--------
>>> ref = reference_element(2, 1)
>>> basis_eval(ref, [1/3, 1/3])
array([0.33333333, 0.33333333, 0.33333333])
"""
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from math import factorial, sqrt

import numpy as np
from scipy.special import roots_jacobi

from .errors import UnsupportedDegree

MAX_EXACTNESS = {1: 60, 2: 40, 3: 30}


def reference_vertices(d):
    """Vertices of the reference ``d``-simplex, shape ``(d+1, d)``."""
    return np.vstack([np.zeros(d), np.eye(d)])


def face_local_vertices(d, face):
    """Local vertex indices of reference face ``face`` (ascending)."""
    return [j for j in range(d + 1) if j != face]


def reference_normal(d, face):
    """Outward unit normal of reference face ``face``."""
    if face == 0:
        return np.full(d, 1.0 / sqrt(d))
    n = np.zeros(d)
    n[face - 1] = -1.0
    return n


def reference_face_measure(d, face):
    """Length (d=2) or area (d=3) of reference face ``face``."""
    base = 1.0 / factorial(d - 1)
    return base * sqrt(d) if face == 0 else base


def simplex_monomial_integral(exponents):
    """Closed-form integral of ``prod x_i**a_i`` over the reference simplex.

    Uses ``prod(a_i!) / (sum(a_i) + d)!``.
    """
    exponents = [int(a) for a in exponents]
    num = 1
    for a in exponents:
        num *= factorial(a)
    return num / factorial(sum(exponents) + len(exponents))


def _exponents(d, k):
    exps = [e for e in product(range(k + 1), repeat=d) if sum(e) <= k]
    exps.sort(key=lambda e: (sum(e), tuple(-a for a in e)))
    return np.array(exps, dtype=int).reshape(-1, d)


def _monomials(x, exps):
    # x: (Q, d), exps: (n, d) -> (Q, n)
    return np.prod(x[:, None, :] ** exps[None, :, :], axis=2)


def _monomial_grads(x, exps):
    Q, d = x.shape
    out = np.empty((Q, exps.shape[0], d))
    for a in range(d):
        lowered = exps.copy()
        lowered[:, a] = np.maximum(lowered[:, a] - 1, 0)
        out[:, :, a] = exps[:, a] * _monomials(x, lowered)
    return out


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    """Equispaced nodal Lagrange element of degree ``k`` on the ``d``-simplex.

    Attributes
    ----------
    d, k : int
        Dimension and polynomial degree. ``k = 0`` is a single node at the
        barycenter.
    nodes : ndarray, shape (n, d)
        Lagrange nodes; ``n = C(k+d, d)``.
    multi_index : ndarray, shape (n, d+1)
        Integer barycentric index of every node (rows sum to ``k``).
    """

    d: int
    k: int
    nodes: np.ndarray
    multi_index: np.ndarray
    exponents: np.ndarray
    coeffs: np.ndarray

    @property
    def n(self):
        return self.nodes.shape[0]

    @property
    def vertex_nodes(self):
        """Index of the node sitting on each reference vertex (k >= 1)."""
        out = []
        for v in range(self.d + 1):
            out.append(int(np.flatnonzero(self.multi_index[:, v] == self.k)[0]))
        return np.array(out)

    def eval(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return _monomials(x, self.exponents) @ self.coeffs

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.einsum("qjd,ji->qid", _monomial_grads(x, self.exponents), self.coeffs)


@lru_cache(maxsize=None)
def reference_element(d, k):
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    if not 0 <= k <= 6:
        raise UnsupportedDegree(f"degree {k} outside supported range 0..6")
    exps = _exponents(d, k)
    if k == 0:
        nodes = np.full((1, d), 1.0 / (d + 1))
        mi = np.zeros((1, d + 1), dtype=int)
    else:
        nodes = exps / k
        mi = np.hstack([k - exps.sum(axis=1, keepdims=True), exps])
    V = _monomials(nodes, exps)
    coeffs = np.linalg.inv(V)
    for arr in (nodes, mi, exps, coeffs):
        arr.setflags(write=False)
    return ReferenceElement(d, k, nodes, mi, exps, coeffs)


def basis_eval(ref, x):
    """Values of all nodal basis functions at one point or a batch of points."""
    x = np.asarray(x, dtype=float)
    vals = ref.eval(x)
    return vals[0] if x.ndim == 1 else vals


def basis_grad(ref, x):
    """Reference gradients, shape ``(n, d)`` for one point, ``(Q, n, d)`` for many."""
    x = np.asarray(x, dtype=float)
    g = ref.grad(x)
    return g[0] if x.ndim == 1 else g


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int
    face: int = None
    # barycentric coordinates w.r.t. the face's local vertices (face rules only)
    face_bary: np.ndarray = None

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


def _gauss_jacobi01(n, alpha):
    t, w = roots_jacobi(n, alpha, 0.0)
    return (1.0 + t) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def _collapsed_rule(d, exactness):
    """Conical-product (collapsed Gauss-Jacobi) rule on the reference d-simplex."""
    n = max(1, (exactness + 2) // 2)
    pts1d, wts1d = [], []
    for i in range(d):
        u, w = _gauss_jacobi01(n, d - 1 - i)
        pts1d.append(u)
        wts1d.append(w)
    grids = np.meshgrid(*pts1d, indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=1)
    W = np.ones(U.shape[0])
    for i, g in enumerate(np.meshgrid(*wts1d, indexing="ij")):
        W = W * g.ravel()
    X = np.empty_like(U)
    scale = np.ones(U.shape[0])
    for i in range(d):
        X[:, i] = scale * U[:, i]
        scale = scale * (1.0 - U[:, i])
    return X, W


def _check_exactness(d, exactness):
    if exactness < 0 or exactness > MAX_EXACTNESS[d]:
        raise UnsupportedDegree(
            f"quadrature exactness {exactness} unsupported in {d}D "
            f"(max {MAX_EXACTNESS[d]})"
        )


@lru_cache(maxsize=None)
def volume_quadrature(d, exactness):
    """Rule on the reference simplex exact for total degree ``exactness``."""
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    _check_exactness(d, exactness)
    X, W = _collapsed_rule(d, exactness)
    X.setflags(write=False)
    W.setflags(write=False)
    return QuadratureRule(X, W, exactness)


@lru_cache(maxsize=None)
def facet_bary_rule(d, exactness):
    """Rule on a ``(d-1)``-simplex in barycentric form, weights summing to 1.

    Returns ``(bary, weights)`` with ``bary`` of shape ``(Q, d)``.
    """
    _check_exactness(d - 1, exactness)
    X, W = _collapsed_rule(d - 1, exactness)
    bary = np.hstack([1.0 - X.sum(axis=1, keepdims=True), X])
    W = W * factorial(d - 1)
    bary.setflags(write=False)
    W.setflags(write=False)
    return bary, W


@lru_cache(maxsize=None)
def face_quadrature(d, exactness, face):
    """Rule on reference face ``face`` with points embedded in the simplex.

    Weights sum to the true measure of the reference face (``sqrt(2)`` for
    the hypotenuse of the triangle).
    """
    if not 0 <= face <= d:
        raise ValueError(f"local face {face} out of range for d={d}")
    bary, w = facet_bary_rule(d, exactness)
    verts = reference_vertices(d)[face_local_vertices(d, face)]
    pts = bary @ verts
    wts = w * reference_face_measure(d, face)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, exactness, face=face, face_bary=bary)


def l2_projection_matrix(ref, rule=None):
    """Reference mass matrix ``M[i, j] = int psi_i psi_j`` on the simplex."""
    if rule is None:
        rule = volume_quadrature(ref.d, 2 * ref.k)
    B = ref.eval(rule.points)
    return (B * rule.weights[:, None]).T @ B
