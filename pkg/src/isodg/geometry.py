"""
Isoparametric element maps.

:func:`build_isoparametric_map` interpolates a smooth blended boundary
transformation at the degree-``k`` Lagrange nodes of every element touching
the boundary.  Integrals over curved elements and faces are
pulled back to the reference simplex with the Jacobian ``J`` of the map::

    int_K f dx = int_Khat f(F(xhat)) det J dxhat
    int_e f ds = int_ehat f(F(xhat)) det J |J^{-T} nhat| dshat
"""
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateMap, UnsupportedDegree
from .fem import (face_quadrature, reference_element, reference_normal,
                  reference_vertices, volume_quadrature)

CHUNK = 4096


@dataclass(frozen=True)
class SurfaceFrame:
    normal: np.ndarray
    scale: float
    ref_normal: np.ndarray


class GeometricMap:
    """Per-element degree-``k`` Lagrange map from the straight mesh to ``D_h``.

    Attributes
    ----------
    mesh : Mesh
    degree : int
    control_points : ndarray, shape (E, n_k, d)
        Physical position of each Lagrange node.
    affine : ndarray of bool, shape (E,)
        True where no control point was moved off its affine position.
    """

    def __init__(self, mesh, degree, control_points, affine, geometry=None):
        self.mesh = mesh
        self.degree = degree
        self.ref = reference_element(mesh.dim, degree)
        self.control_points = control_points
        self.affine = affine
        self.geometry = geometry
        control_points.setflags(write=False)
        affine.setflags(write=False)

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def curved_elements(self):
        return np.flatnonzero(~self.affine)

    def __repr__(self):
        return (f"GeometricMap(degree={self.degree}, nelem={self.mesh.nelem}, "
                f"curved={int((~self.affine).sum())})")

    def evaluate(self, elems, xhat, need_jacobian=True):
        """Physical points and Jacobians at reference points.

        Parameters
        ----------
        elems : array of int, shape (n,)
        xhat : ndarray, shape (Q, d) shared by all elements or (n, Q, d)

        Returns
        -------
        x : ndarray (n, Q, d)
        J : ndarray (n, Q, d, d), ``J[..., a, b] = dx_a / dxhat_b``
        det : ndarray (n, Q)
        """
        elems = np.asarray(elems)
        xhat = np.asarray(xhat, dtype=float)
        C = self.control_points[elems]
        d = self.dim
        if xhat.ndim == 2:
            B = self.ref.eval(xhat)
            x = np.einsum("qj,ejd->eqd", B, C)
            if not need_jacobian:
                return x
            G = self.ref.grad(xhat)
            J = np.einsum("ejd,qjb->eqdb", C, G)
        else:
            n, Q, _ = xhat.shape
            flat = xhat.reshape(-1, d)
            B = self.ref.eval(flat).reshape(n, Q, -1)
            x = np.einsum("eqj,ejd->eqd", B, C)
            if not need_jacobian:
                return x
            G = self.ref.grad(flat).reshape(n, Q, -1, d)
            J = np.einsum("ejd,eqjb->eqdb", C, G)
        return x, J, np.linalg.det(J)


def _canonical_nodes(mesh, ref):
    """Affine node positions, summed in ascending global vertex order.

    Summation order depends only on the node's global vertices, so a node
    shared by two elements gets bitwise identical coordinates from both.
    """
    lam = ref.multi_index / max(ref.k, 1)
    order = np.argsort(mesh.elements, axis=1, kind="stable")
    gids = np.take_along_axis(mesh.elements, order, axis=1)
    E = mesh.nelem
    acc = np.zeros((E, ref.n, mesh.dim))
    for t in range(mesh.dim + 1):
        coef = lam[:, order[:, t]].T  # (E, n)
        acc = acc + coef[:, :, None] * mesh.vertices[gids[:, t]][:, None, :]
    return acc


def _gamma_simplices(mesh, geometry, tol=1e-10):
    """Vertex flags and boundary sub-simplices lying on the exact boundary.

    A mesh boundary face counts only if all its vertices satisfy
    ``|phi| <= tol``; every sub-simplex with at least two vertices of such a
    face is recorded as a sorted tuple of global ids.
    """
    on_gamma = np.zeros(mesh.nvert, dtype=bool)
    bv = mesh.boundary_vertices
    on_gamma[bv] = np.abs(geometry.phi(mesh.vertices[bv])) <= tol
    simplices = set()
    for face in mesh.face_vertices[mesh.boundary_faces]:
        if not on_gamma[face].all():
            continue
        face = tuple(int(v) for v in face)
        for r in range(2, len(face) + 1):
            simplices.update(combinations(face, r))
    return on_gamma, simplices


def _blend_support(mesh, elems, on_gamma, simplices):
    """Per element, the boundary sub-simplex that carries the curvature.

    Returns a boolean mask ``(len(elems), d+1)`` over local vertices; all
    False when the element only touches the boundary at a vertex or chord.
    """
    d = mesh.dim
    mask = np.zeros((len(elems), d + 1), dtype=bool)
    for row, e in enumerate(elems):
        gv = [int(v) for v in mesh.elements[e]]
        local = [i for i in range(d + 1) if on_gamma[gv[i]]]
        best = []
        for r in range(len(local), 1, -1):
            found = [c for c in combinations(local, r)
                     if tuple(sorted(gv[i] for i in c)) in simplices]
            if len(found) > 1:
                raise DegenerateMap(
                    f"element {e} meets the curved boundary along {len(found)} "
                    "faces/edges; refine the mesh"
                )
            if found:
                best = found[0]
                break
        mask[row, list(best)] = True
    return mask


def build_isoparametric_map(mesh, k, geometry=None, check_exactness=None):
    """Degree-``k`` isoparametric map of ``mesh`` onto the curved domain.

    The map interpolates, at the Lagrange nodes, the blended transformation
    ``x + lam_S**2 (P(y) - y)`` where ``S`` is the element's face (or edge)
    on the boundary, ``lam_S`` the sum of the barycentric coordinates of its
    vertices, ``y`` the point of ``S`` with barycentric coordinates
    ``lam_i / lam_S`` and ``P`` the projection onto the exact boundary.
    Nodes on ``S`` land exactly on the boundary, faces away from ``S`` stay
    straight, and elements whose vertices are all interior stay affine.

    Parameters
    ----------
    mesh : Mesh
        Straight mesh whose boundary vertices lie on the exact boundary.
    k : int
        Geometric degree, ``1 <= k <= 4``. ``k = 1`` is the straight mesh.
    geometry : DomainGeometry or None
        Exact domain. ``None`` or a polygonal geometry gives an affine map.
    check_exactness : int, optional
        Volume quadrature exactness used for the positivity check of
        ``det J`` (default ``3k``); face points use one degree more.

    Raises
    ------
    DegenerateMap
        If ``det J <= 0`` at a checked quadrature point, or an element meets
        the boundary along more than one face.
    """
    if not 1 <= k <= 4:
        raise UnsupportedDegree(f"geometric degree {k} outside 1..4")
    ref = reference_element(mesh.dim, k)
    ctrl = _canonical_nodes(mesh, ref)
    # vertex nodes are exactly the mesh vertices
    ctrl[:, ref.vertex_nodes, :] = mesh.vertices[mesh.elements]
    affine = np.ones(mesh.nelem, dtype=bool)
    if k > 1 and geometry is not None and geometry.curved:
        on_gamma, simplices = _gamma_simplices(mesh, geometry)
        cand = np.flatnonzero(on_gamma[mesh.elements].sum(axis=1) >= 2)
        if len(cand):
            _curve_elements(mesh, ref, geometry, ctrl, affine, cand, on_gamma, simplices)
    gmap = GeometricMap(mesh, k, ctrl, affine, geometry)
    check_positive_jacobian(gmap, check_exactness)
    return gmap


def _curve_elements(mesh, ref, geometry, ctrl, affine, cand, on_gamma, simplices):
    mask = _blend_support(mesh, cand, on_gamma, simplices)
    keep = mask.any(axis=1)
    cand, mask = cand[keep], mask[keep]
    if len(cand) == 0:
        return
    lam = ref.multi_index / ref.k
    order = np.argsort(mesh.elements[cand], axis=1, kind="stable")
    gids = np.take_along_axis(mesh.elements[cand], order, axis=1)
    smask = np.take_along_axis(mask, order, axis=1)
    n, d = ref.n, mesh.dim
    lam_s = np.zeros((len(cand), n))
    ysum = np.zeros((len(cand), n, d))
    nterms = np.zeros((len(cand), n), dtype=int)
    # canonical (global id) summation order keeps shared nodes bitwise equal
    for t in range(d + 1):
        coef = lam[:, order[:, t]].T * smask[:, t:t + 1]
        lam_s = lam_s + coef
        ysum = ysum + coef[:, :, None] * mesh.vertices[gids[:, t]][:, None, :]
        nterms += coef > 0
    move = nterms >= 2
    if not move.any():
        return
    e_idx, j_idx = np.nonzero(move)
    ls = lam_s[e_idx, j_idx]
    y = ysum[e_idx, j_idx] / ls[:, None]
    py = geometry.project(y)
    on_face = ls == 1.0
    x = ctrl[cand[e_idx], j_idx]
    new = np.where(on_face[:, None], py, x + (ls**2)[:, None] * (py - y))
    ctrl[cand[e_idx], j_idx] = new
    affine[cand[np.unique(e_idx)]] = False


def check_continuity(gmap):
    """Largest mismatch of control points shared by neighbouring elements.

    Nodes are matched through their global vertex support and barycentric
    multiplicities; a globally continuous map returns exactly 0.0.
    """
    mesh, ref = gmap.mesh, gmap.ref
    seen = {}
    worst = 0.0
    mi = ref.multi_index
    for e in range(mesh.nelem):
        gv = mesh.elements[e]
        for j in range(ref.n):
            key = tuple(sorted((int(gv[i]), int(mi[j, i])) for i in range(mesh.dim + 1) if mi[j, i]))
            p = gmap.control_points[e, j]
            if key in seen:
                worst = max(worst, float(np.max(np.abs(seen[key] - p))))
            else:
                seen[key] = p
    return worst


def straight_map(mesh):
    """Affine (``k = 1``) map of the straight mesh."""
    return build_isoparametric_map(mesh, 1, None)


def check_positive_jacobian(gmap, exactness=None):
    """Raise :class:`DegenerateMap` if ``det J <= 0`` at any checked point."""
    d = gmap.dim
    if exactness is None:
        exactness = max(3 * gmap.degree, 2)
    curved = gmap.curved_elements
    if len(curved) == 0:
        dets = gmap.mesh.affine_determinants()
        if np.any(dets <= 0):
            raise DegenerateMap("straight element with non-positive Jacobian")
        return
    pts = [volume_quadrature(d, exactness).points]
    pts += [face_quadrature(d, exactness + 1, f).points for f in range(d + 1)]
    pts.append(reference_vertices(d))
    pts = np.vstack(pts)
    worst = np.inf
    for start in range(0, len(curved), CHUNK):
        el = curved[start:start + CHUNK]
        _, _, det = gmap.evaluate(el, pts)
        worst = min(worst, det.min())
        if worst <= 0:
            bad = el[np.argmin(det.min(axis=1))]
            raise DegenerateMap(
                f"det J = {det.min():.3e} <= 0 in element {bad}; mesh too coarse for the geometry"
            )


def map_point(gmap, elem, xhat):
    """Physical image of reference point ``xhat`` under element ``elem``."""
    x = gmap.evaluate([elem], np.atleast_2d(xhat), need_jacobian=False)
    return x[0, 0]


def jacobian(gmap, elem, xhat):
    """Jacobian matrix and determinant of element ``elem`` at ``xhat``."""
    _, J, det = gmap.evaluate([elem], np.atleast_2d(xhat))
    if det[0, 0] <= 0:
        raise DegenerateMap(f"det J = {det[0, 0]:.3e} <= 0 in element {elem}")
    return J[0, 0], float(det[0, 0])


def frames(J, det, ref_normals):
    """Vectorized surface frames.

    ``J`` is ``(..., d, d)``, ``ref_normals`` broadcastable to ``(..., d)``.
    Returns physical unit normals and area ratios ``det J |J^{-T} nhat|``.
    """
    # J^{-T} nhat solves J^T y = nhat
    Jt = np.swapaxes(J, -1, -2)
    nh = np.broadcast_to(ref_normals, J.shape[:-1])
    y = np.linalg.solve(Jt, nh[..., None])[..., 0]
    ny = np.linalg.norm(y, axis=-1)
    return y / ny[..., None], det * ny


def surface_frame(gmap, elem, local_face, xhat_face):
    """Normal and surface scale at a reference point of a local face."""
    nhat = reference_normal(gmap.dim, local_face)
    _, J, det = gmap.evaluate([elem], np.atleast_2d(xhat_face))
    if det[0, 0] <= 0:
        raise DegenerateMap(f"det J = {det[0, 0]:.3e} <= 0 in element {elem}")
    n, s = frames(J[0, 0], det[0, 0], nhat)
    return SurfaceFrame(normal=n, scale=float(s), ref_normal=nhat)


def mapped_measure(gmap, exactness=None):
    """Area/volume of the computational domain, ``sum_K int det J``."""
    d = gmap.dim
    if exactness is None:
        exactness = max(d * (gmap.degree - 1), 1)
    rule = volume_quadrature(d, exactness)
    total = 0.0
    E = gmap.mesh.nelem
    for start in range(0, E, CHUNK):
        el = np.arange(start, min(E, start + CHUNK))
        _, _, det = gmap.evaluate(el, rule.points)
        total += float(np.sum(det @ rule.weights))
    return total


def boundary_face_points(gmap, exactness=None):
    """Physical quadrature points on the boundary faces of ``D_h``."""
    mesh = gmap.mesh
    d = mesh.dim
    if exactness is None:
        exactness = 2 * gmap.degree + 2
    bf = mesh.boundary_faces
    out = []
    for f in range(d + 1):
        sel = bf[mesh.face_local[bf, 0] == f]
        if len(sel) == 0:
            continue
        pts = face_quadrature(d, exactness, f).points
        out.append(gmap.evaluate(mesh.face_elements[sel, 0], pts, need_jacobian=False).reshape(-1, d))
    return np.vstack(out)


def boundary_distance(gmap, geometry, exactness=None):
    """Max distance from mapped boundary quadrature points to the exact boundary."""
    return float(np.max(geometry.distance(boundary_face_points(gmap, exactness))))


def map_deviation(gmap, exactness=None):
    """Max over elements of ``|F_h - F_affine|`` and of ``|I - J J_aff^{-1}|``.

    Both are zero on affine elements; on a refinement family the first
    decays like ``h^2`` and the second like ``h``.
    """
    d = gmap.dim
    curved = gmap.curved_elements
    if len(curved) == 0:
        return 0.0, 0.0
    if exactness is None:
        exactness = 2 * gmap.degree
    pts = volume_quadrature(d, exactness).points
    mesh = gmap.mesh
    Ja = mesh.affine_jacobians()[curved]
    v0 = mesh.vertices[mesh.elements[curved, 0]]
    x, J, _ = gmap.evaluate(curved, pts)
    xa = v0[:, None, :] + np.einsum("eab,qb->eqa", Ja, pts)
    dev = np.linalg.norm(x - xa, axis=-1).max()
    rel = J @ np.linalg.inv(Ja)[:, None]
    jdev = np.linalg.norm(rel - np.eye(d), ord=2, axis=(-2, -1)).max()
    return float(dev), float(jdev)
