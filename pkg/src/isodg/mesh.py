"""
Straight simplicial meshes of the reference computational domain.

A :class:`Mesh` stores vertex coordinates, element connectivity and a face
table.  Faces are keyed by their sorted global vertex tuple; side 0 is the
first element (in element order) that owns the face, side 1 the second one
or ``-1`` on the boundary.

Examples
--------
>>> from isodg.domain import Circle
>>> m = generate_disc_mesh(1, Circle((0, 0), 0.5))
>>> m.nelem
32
"""
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .domain import Ball, Polygonal
from .errors import MeshError, ProjectionFailure
from .fem import face_local_vertices

BOUNDARY = -1
ON_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class FaceIncidence:
    """Both sides of one face.

    ``perm[s][j]`` is the element-local vertex index of face vertex ``j`` seen
    from side ``s``; ``elements[s] == -1`` marks the boundary.
    """

    face: int
    vertices: tuple
    elements: tuple
    local_faces: tuple
    perm: tuple

    @property
    def is_boundary(self):
        return self.elements[1] == BOUNDARY


class Mesh:
    """Immutable straight simplicial mesh with face connectivity."""

    def __init__(self, vertices, elements, *, fix_orientation=True, validate=True):
        vertices = np.array(vertices, dtype=float)
        elements = np.array(elements, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise MeshError("vertices must be an (N, 2) or (N, 3) array")
        d = vertices.shape[1]
        if elements.ndim != 2 or elements.shape[1] != d + 1:
            raise MeshError(f"elements must have {d + 1} vertices each")
        if elements.size and (elements.min() < 0 or elements.max() >= len(vertices)):
            raise MeshError("element references a vertex index out of range")
        if len(vertices) < d + 1 or len(elements) == 0:
            raise MeshError("mesh needs at least one element")
        if fix_orientation:
            elements = _orient(vertices, elements)
        self.vertices = vertices
        self.elements = elements
        self._build_faces()
        for arr in (self.vertices, self.elements, self.face_vertices, self.face_elements,
                    self.face_local, self.face_perm):
            arr.setflags(write=False)
        if validate:
            self.validate()

    # basic sizes -----------------------------------------------------------
    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def nvert(self):
        return self.vertices.shape[0]

    @property
    def nelem(self):
        return self.elements.shape[0]

    @property
    def nfaces(self):
        return self.face_vertices.shape[0]

    @property
    def boundary_faces(self):
        return np.flatnonzero(self.face_elements[:, 1] == BOUNDARY)

    @property
    def interior_faces(self):
        return np.flatnonzero(self.face_elements[:, 1] != BOUNDARY)

    @property
    def boundary_vertices(self):
        return np.unique(self.face_vertices[self.boundary_faces])

    def __repr__(self):
        return (f"Mesh(dim={self.dim}, nvert={self.nvert}, nelem={self.nelem}, "
                f"nfaces={self.nfaces}, nboundary={len(self.boundary_faces)})")

    # connectivity ------------------------------------------------------------
    def _build_faces(self):
        d = self.dim
        E = self.nelem
        loc = np.array([face_local_vertices(d, i) for i in range(d + 1)])
        fv = self.elements[:, loc].reshape(-1, d)
        order = np.argsort(fv, axis=1, kind="stable")
        key = np.take_along_axis(fv, order, axis=1)
        uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        if np.any(counts > 2):
            raise MeshError("non-manifold mesh: a face is shared by more than two elements")
        F = len(uniq)
        rows = np.argsort(inv, kind="stable")
        first = np.ones(len(rows), dtype=bool)
        first[1:] = inv[rows[1:]] != inv[rows[:-1]]
        side = np.where(first, 0, 1)
        face_elements = np.full((F, 2), BOUNDARY, dtype=np.int64)
        face_local = np.full((F, 2), BOUNDARY, dtype=np.int64)
        face_perm = np.full((F, 2, d), BOUNDARY, dtype=np.int64)
        elem = rows // (d + 1)
        lf = rows % (d + 1)
        fid = inv[rows]
        face_elements[fid, side] = elem
        face_local[fid, side] = lf
        face_perm[fid, side] = loc[lf[:, None], order[rows]]
        self.face_vertices = uniq.astype(np.int64)
        self.face_elements = face_elements
        self.face_local = face_local
        self.face_perm = face_perm
        # element -> face table
        ef = np.empty((E, d + 1), dtype=np.int64)
        ef[elem, lf] = fid
        self.element_faces = ef
        ef.setflags(write=False)

    def face_incidence(self, f):
        fe = self.face_elements[f]
        return FaceIncidence(
            face=int(f),
            vertices=tuple(int(v) for v in self.face_vertices[f]),
            elements=(int(fe[0]), int(fe[1])),
            local_faces=tuple(int(v) for v in self.face_local[f]),
            perm=tuple(tuple(int(v) for v in self.face_perm[f, s]) for s in range(2)),
        )

    @property
    def faces(self):
        return [self.face_incidence(f) for f in range(self.nfaces)]

    def edges(self):
        """Unique sorted vertex pairs and the element-local edge -> edge map."""
        pairs = _local_edges(self.dim)
        ev = np.sort(self.elements[:, pairs], axis=2).reshape(-1, 2)
        uniq, inv = np.unique(ev, axis=0, return_inverse=True)
        return uniq, inv.reshape(self.nelem, len(pairs))

    def boundary_edges(self):
        """Sorted vertex pairs of all edges lying on the boundary."""
        bf = self.face_vertices[self.boundary_faces]
        if self.dim == 2:
            return np.unique(np.sort(bf, axis=1), axis=0)
        pairs = np.array([[0, 1], [0, 2], [1, 2]])
        e = np.sort(bf[:, pairs].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    # straight geometry -------------------------------------------------------
    def affine_jacobians(self):
        """Jacobians ``(E, d, d)`` of the straight affine element maps."""
        v = self.vertices[self.elements]
        return np.transpose(v[:, 1:, :] - v[:, :1, :], (0, 2, 1))

    def affine_determinants(self):
        return np.linalg.det(self.affine_jacobians())

    def element_measures(self):
        return self.affine_determinants() / factorial(self.dim)

    def element_diameters(self):
        v = self.vertices[self.elements]
        pairs = _local_edges(self.dim)
        return np.linalg.norm(v[:, pairs[:, 0]] - v[:, pairs[:, 1]], axis=2).max(axis=1)

    @property
    def h(self):
        return float(self.element_diameters().max())

    def quasi_uniformity(self):
        diam = self.element_diameters()
        return float(diam.max() / diam.min())

    # checks --------------------------------------------------------------------
    def validate(self):
        """Check the structural invariants; raises :class:`MeshError`."""
        if np.any(self.affine_determinants() <= 0.0):
            raise MeshError("element with non-positive affine Jacobian determinant")
        inner = self.interior_faces
        for s in range(2):
            ids = self.elements[self.face_elements[inner, s][:, None], self.face_perm[inner, s]]
            if not np.array_equal(ids, self.face_vertices[inner]):
                raise MeshError("face handshake failed")
        bnd = self.boundary_faces
        ids = self.elements[self.face_elements[bnd, 0][:, None], self.face_perm[bnd, 0]]
        if not np.array_equal(ids, self.face_vertices[bnd]):
            raise MeshError("boundary face incidence inconsistent")
        if cKDTree(self.vertices).query_pairs(1e-12):
            raise MeshError("duplicate vertices within 1e-12")
        f = self.face_elements[inner]
        adj = coo_matrix((np.ones(len(f)), (f[:, 0], f[:, 1])), shape=(self.nelem,) * 2)
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise MeshError(f"mesh is not connected ({ncomp} components)")
        used = np.zeros(self.nvert, dtype=bool)
        used[self.elements.ravel()] = True
        if not used.all():
            raise MeshError("mesh contains vertices not used by any element")

    def check_boundary_on(self, geometry, tol=ON_BOUNDARY_TOL):
        """Raise unless every boundary vertex satisfies ``|phi| <= tol``."""
        bv = self.vertices[self.boundary_vertices]
        err = np.max(np.abs(geometry.phi(bv)))
        if err > tol:
            raise MeshError(f"boundary vertex off the domain boundary by {err:.3e}")
        return float(err)


def _local_edges(d):
    if d == 2:
        return np.array([[0, 1], [1, 2], [0, 2]])
    return np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


def _orient(vertices, elements):
    v = vertices[elements]
    J = v[:, 1:, :] - v[:, :1, :]
    det = np.linalg.det(J)
    elements = elements.copy()
    flip = det < 0
    elements[flip, 1], elements[flip, 2] = elements[flip, 2], elements[flip, 1].copy()
    return elements


# generators ------------------------------------------------------------------
def _disc_level0(geometry, nsides=8):
    c, r = geometry.center, geometry.radius
    t = 2.0 * np.pi * np.arange(nsides) / nsides
    ring = c + r * np.stack([np.cos(t), np.sin(t)], axis=1)
    verts = np.vstack([c, ring])
    elems = [[0, 1 + j, 1 + (j + 1) % nsides] for j in range(nsides)]
    return verts, np.array(elems)


def _ball_level0(geometry):
    """48 tetrahedra: origin fanned to a cube surface split into 8 triangles per face."""
    pts = {}

    def vid(p):
        key = tuple(int(round(2 * a)) for a in p)
        if key not in pts:
            pts[key] = len(pts) + 1
        return pts[key]

    tris = []
    for axis in range(3):
        b, c = [a for a in range(3) if a != axis]
        for s in (1.0, -1.0):
            center = np.zeros(3)
            center[axis] = s
            corners = []
            for cb, cc in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
                p = center.copy()
                p[b], p[c] = cb, cc
                corners.append(p)
            ic = vid(center)
            for j in range(4):
                p, q = corners[j], corners[(j + 1) % 4]
                m = 0.5 * (p + q)
                tris.append((ic, vid(p), vid(m)))
                tris.append((ic, vid(m), vid(q)))
    verts = np.zeros((len(pts) + 1, 3))
    for key, i in pts.items():
        p = np.array(key, dtype=float) / 2.0
        verts[i] = p / np.linalg.norm(p)
    verts = geometry.center + geometry.radius * verts
    verts[0] = geometry.center
    elems = np.array([(0,) + t for t in tris])
    return verts, elems


def _require_ball(geometry, dim):
    if not isinstance(geometry, Ball) or geometry.dim != dim:
        kind = "circle" if dim == 2 else "sphere"
        raise ValueError(f"expected a {kind} geometry, got {geometry!r}")


def generate_disc_mesh(level, geometry):
    """Fan of 8 triangles inscribed in the circle, refined ``level`` times."""
    _require_ball(geometry, 2)
    if level < 0:
        raise ValueError("level must be non-negative")
    mesh = Mesh(*_disc_level0(geometry))
    for _ in range(level):
        mesh = refine_mesh(mesh, geometry)
    mesh.check_boundary_on(geometry)
    return mesh


def generate_ball_mesh(level, geometry):
    """48-tetrahedron ball (8**level times more elements after refinement)."""
    _require_ball(geometry, 3)
    if level < 0:
        raise ValueError("level must be non-negative")
    mesh = Mesh(*_ball_level0(geometry))
    for _ in range(level):
        mesh = refine_mesh(mesh, geometry)
    mesh.check_boundary_on(geometry)
    return mesh


def generate_square_mesh(level, geometry=None):
    """Unit square split into 4 triangles around its center, refined ``level`` times."""
    if geometry is None:
        geometry = Polygonal.unit_square()
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], dtype=float)
    elems = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    mesh = Mesh(verts, elems)
    for _ in range(level):
        mesh = refine_mesh(mesh, geometry)
    return mesh


def generate_polyhedron_mesh(level, sphere):
    """The level-0 ball tetrahedralization refined WITHOUT boundary projection.

    Returns ``(mesh, polyhedron)`` where ``polyhedron`` is the convex hull of
    the coarse mesh, which stays the exact domain at every level.
    """
    base = generate_ball_mesh(0, sphere)
    poly = Polygonal.from_points(base.vertices[base.boundary_vertices])
    mesh = base
    for _ in range(level):
        mesh = refine_mesh(mesh, poly)
    return mesh, poly


# refinement --------------------------------------------------------------------
def refine_mesh(mesh, geometry=None):
    """Uniform red refinement; new boundary vertices are projected onto the boundary.

    Triangles split into 4, tetrahedra into 8 (the inner octahedron is cut
    along its shortest diagonal). ``geometry=None`` skips projection.
    """
    d = mesh.dim
    edges, e2e = mesh.edges()
    V = mesh.nvert
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    affine_verts = np.vstack([mesh.vertices, mid])
    mid = mid.copy()
    if geometry is not None and geometry.curved:
        bedges = mesh.boundary_edges()
        on_bnd = _rows_in(edges, bedges)
        if on_bnd.any():
            try:
                proj = geometry.project(mid[on_bnd])
            except ProjectionFailure as exc:
                raise ProjectionFailure(f"refinement projection failed: {exc}") from exc
            if not np.all(np.isfinite(proj)):
                raise ProjectionFailure("projection produced non-finite coordinates")
            mid[on_bnd] = proj
    verts = np.vstack([mesh.vertices, mid])
    el = mesh.elements
    m = V + e2e  # (E, nedges) global ids of midpoints
    if d == 2:
        # local edges: 01, 12, 02
        a, b, c = el[:, 0], el[:, 1], el[:, 2]
        m01, m12, m02 = m[:, 0], m[:, 1], m[:, 2]
        children = np.stack([
            np.stack([a, m01, m02], 1),
            np.stack([m01, b, m12], 1),
            np.stack([m02, m12, c], 1),
            np.stack([m01, m12, m02], 1),
        ], axis=1)
    else:
        v0, v1, v2, v3 = el.T
        m01, m02, m03, m12, m13, m23 = m.T
        corners = [
            np.stack([v0, m01, m02, m03], 1),
            np.stack([m01, v1, m12, m13], 1),
            np.stack([m02, m12, v2, m23], 1),
            np.stack([m03, m13, m23, v3], 1),
        ]
        # diagonal choices with the cyclic ring of the remaining four midpoints
        options = [
            (m01, m23, [m02, m03, m13, m12]),
            (m02, m13, [m01, m03, m23, m12]),
            (m03, m12, [m01, m02, m23, m13]),
        ]
        lengths = np.stack([np.linalg.norm(verts[p] - verts[q], axis=1) for p, q, _ in options], 1)
        choice = np.argmin(lengths, axis=1)
        inner = []
        for j in range(4):
            tets = [np.stack([p, q, ring[j], ring[(j + 1) % 4]], 1) for p, q, ring in options]
            inner.append(np.choose(choice[:, None], tets))
        children = np.stack(corners + inner, axis=1)
    # orientation is decided on the unprojected subdivision so that a child
    # inverted by boundary projection is reported instead of silently flipped
    children = _orient(affine_verts, children.reshape(-1, d + 1))
    new = Mesh(verts, children, fix_orientation=False, validate=False)
    if np.any(new.affine_determinants() <= 0.0):
        raise MeshError("refinement produced an inverted element")
    new.validate()
    return new


def _rows_in(rows, table):
    """Boolean mask: which rows of ``rows`` appear in ``table`` (int pairs)."""
    if len(table) == 0:
        return np.zeros(len(rows), dtype=bool)
    base = int(max(rows.max(), table.max())) + 1
    a = rows[:, 0] * base + rows[:, 1]
    b = table[:, 0] * base + table[:, 1]
    return np.isin(a, b)
