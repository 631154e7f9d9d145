"""Exact domain descriptions: implicit level set plus projection onto the boundary."""
import numpy as np
from scipy.spatial import ConvexHull

from .errors import ProjectionFailure


class DomainGeometry:
    """Abstract exact domain ``D = {phi < 0}`` with boundary ``{phi = 0}``.

    Subclasses implement :meth:`phi` and :meth:`project`; both accept a single
    point or an ``(N, d)`` batch.
    """

    kind = "abstract"
    dim = None

    @property
    def curved(self):
        return self.kind != "polygonal"

    def phi(self, x):
        raise NotImplementedError

    def project(self, x):
        raise NotImplementedError

    def distance(self, x):
        """Distance from ``x`` to the boundary."""
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(np.atleast_2d(x) - np.atleast_2d(self.project(x)), axis=-1)


class Ball(DomainGeometry):
    """Disc (d=2) or ball (d=3) with closed-form radial projection."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = self.center.size
        if self.dim not in (2, 3):
            raise ValueError("center must have 2 or 3 coordinates")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.kind = "circle" if self.dim == 2 else "sphere"

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) - self.radius

    def project(self, x):
        x = np.asarray(x, dtype=float)
        r = x - self.center
        nrm = np.linalg.norm(r, axis=-1, keepdims=True)
        if np.any(nrm == 0.0):
            raise ProjectionFailure("cannot project the center of a circle/sphere")
        return self.center + self.radius * r / nrm

    def distance(self, x):
        return np.abs(self.phi(x))

    @property
    def measure(self):
        if self.dim == 2:
            return np.pi * self.radius**2
        return 4.0 / 3.0 * np.pi * self.radius**3


def Circle(center=(0.0, 0.0), radius=0.5):
    return Ball(center, radius)


def Sphere(center=(0.0, 0.0, 0.0), radius=1.0):
    return Ball(center, radius)


class Polygonal(DomainGeometry):
    """Convex polygon/polyhedron given by half-spaces ``A x + b <= 0``.

    Rows of ``A`` are unit normals, so ``phi`` is a signed distance inside and
    near the boundary. ``equations`` follows :attr:`scipy.spatial.ConvexHull.equations`.
    """

    kind = "polygonal"

    def __init__(self, equations):
        eq = np.asarray(equations, dtype=float)
        self.A = eq[:, :-1]
        self.b = eq[:, -1]
        self.dim = self.A.shape[1]

    @classmethod
    def from_points(cls, points):
        hull = ConvexHull(np.asarray(points, dtype=float))
        # merge coplanar facets so projections pick a unique plane
        eq = np.unique(np.round(hull.equations, 12), axis=0)
        return cls(eq)

    @classmethod
    def unit_square(cls):
        return cls([[-1, 0, 0], [1, 0, -1], [0, -1, 0], [0, 1, -1]])

    def __repr__(self):
        return f"Polygonal({len(self.b)} facets, dim={self.dim})"

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return np.max(x @ self.A.T + self.b, axis=-1)

    def project(self, x):
        x = np.asarray(x, dtype=float)
        vals = x @ self.A.T + self.b
        i = np.argmax(vals, axis=-1)
        a = self.A[i]
        return x - np.take_along_axis(vals, np.expand_dims(i, -1), -1) * a

    @property
    def measure(self):
        from scipy.spatial import HalfspaceIntersection

        interior = _interior_point(self.A, self.b)
        hs = HalfspaceIntersection(np.hstack([self.A, self.b[:, None]]), interior)
        return ConvexHull(hs.intersections).volume


def _interior_point(A, b):
    from scipy.optimize import linprog

    # Chebyshev center
    norm = np.linalg.norm(A, axis=1, keepdims=True)
    res = linprog(np.r_[np.zeros(A.shape[1]), -1.0], A_ub=np.hstack([A, norm]), b_ub=-b,
                  bounds=[(None, None)] * A.shape[1] + [(0, None)])
    return res.x[:-1]


class Implicit(DomainGeometry):
    """General smooth domain ``{phi < 0}``; projection by Newton steps along grad phi."""

    kind = "implicit"

    def __init__(self, phi, grad, dim, tol=1e-13, maxiter=50):
        self._phi = phi
        self._grad = grad
        self.dim = dim
        self.tol = tol
        self.maxiter = maxiter

    def phi(self, x):
        return self._phi(np.asarray(x, dtype=float))

    def project(self, x):
        x = np.array(x, dtype=float)
        single = x.ndim == 1
        y = np.atleast_2d(x).copy()
        for _ in range(self.maxiter):
            val = self._phi(y)
            g = self._grad(y)
            gg = np.sum(g * g, axis=-1)
            if np.any(gg == 0.0):
                raise ProjectionFailure("vanishing level-set gradient during projection")
            y = y - (val / gg)[:, None] * g
            if np.all(np.abs(self._phi(y)) <= self.tol):
                return y[0] if single else y
        raise ProjectionFailure(
            f"projection did not converge in {self.maxiter} iterations "
            f"(max |phi| = {np.max(np.abs(self._phi(y))):.3e})"
        )
