"""
Upwind DG discretization of ``Omega . grad I + sigma I = f`` on curved meshes.

The matrix is assembled from the upwind form::

    B(u, v) = sum_K int_K (Omega.grad u + sigma u) v
              - sum_K int_{inflow(K) on Gamma_h} (Omega.n) u v
              - sum_K int_{inflow(K) interior} (Omega.n) [u] v
    l(v)    = sum_K int_K f v - sum_K int_{inflow(K) on Gamma_h} (Omega.n) g v

with ``[u] = u_K - u_neighbour``.  All integrals are pulled back to the
reference simplex through the isoparametric map; inflow/outflow is decided
per quadrature point.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse import bsr_matrix

from .errors import NonUnitDirection
from .fem import (facet_bary_rule, reference_element, reference_face_measure,
                  reference_normal, reference_vertices, volume_quadrature)
from .geometry import frames

EPS_CHARACTERISTIC = 1e-14
CHUNK = 2048

INFLOW, OUTFLOW, CHARACTERISTIC = "inflow", "outflow", "characteristic"


def _as_field(value):
    if callable(value):
        return value
    c = float(value)
    return lambda x: np.full(np.shape(x)[:-1], c)


@dataclass
class TransportProblem:
    """Data of the steady single-direction transport problem.

    ``sigma``, ``source`` and ``inflow`` take an ``(..., d)`` array of points
    and return an ``(...)`` array; constants are accepted for ``sigma`` and
    are promoted to fields. ``inflow`` defaults to ``exact``.
    """

    direction: np.ndarray
    sigma: Callable = 1.0
    source: Callable = 0.0
    inflow: Optional[Callable] = None
    exact: Optional[Callable] = None
    exact_grad: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=float)
        norm = np.linalg.norm(self.direction)
        if abs(norm - 1.0) > 1e-14:
            raise NonUnitDirection(f"|Omega| = {norm!r}, expected 1")
        self.sigma = _as_field(self.sigma)
        self.source = _as_field(self.source)
        if self.inflow is None:
            self.inflow = self.exact if self.exact is not None else _as_field(0.0)
        else:
            self.inflow = _as_field(self.inflow)

    @property
    def dim(self):
        return self.direction.size

    def manufactured_residual(self, points):
        """``max |f - (Omega.grad I + sigma I)|`` at the given points."""
        if self.exact is None or self.exact_grad is None:
            raise ValueError("exact solution and gradient required")
        x = np.asarray(points, dtype=float)
        lhs = self.exact_grad(x) @ self.direction + self.sigma(x) * self.exact(x)
        return float(np.max(np.abs(self.source(x) - lhs)))


def classify_face_point(direction, frame, eps=EPS_CHARACTERISTIC):
    """Inflow / outflow / characteristic from the sign of ``Omega . n_h``."""
    normal = frame.normal if hasattr(frame, "normal") else frame
    a = float(np.dot(direction, normal))
    if a < -eps:
        return INFLOW
    if a > eps:
        return OUTFLOW
    return CHARACTERISTIC


@dataclass
class Quadrature:
    """Quadrature exactness used for volume and face integrals (None = default)."""

    volume: Optional[int] = None
    face: Optional[int] = None


class DGSpace:
    """Broken degree-``k`` space on the curved mesh, dofs blocked per element."""

    def __init__(self, gmap, degree, quadrature=None):
        self.gmap = gmap
        self.mesh = gmap.mesh
        self.degree = degree
        self.ref = reference_element(self.mesh.dim, degree)
        q = quadrature or Quadrature()
        g = gmap.degree
        self.volume_exactness = q.volume if q.volume is not None else max(2 * degree + max(degree, g), 1)
        self.face_exactness = q.face if q.face is not None else max(2 * degree + max(degree, g) + 1, 1)

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def nloc(self):
        return self.ref.n

    @property
    def ndof(self):
        return self.mesh.nelem * self.ref.n

    @property
    def geometry(self):
        return self.gmap.geometry

    def dofs(self, elem):
        n = self.nloc
        return np.arange(elem * n, (elem + 1) * n)

    def interpolate(self, func):
        """Nodal interpolant: coefficients ``func(F_h(node))``."""
        x = self.gmap.evaluate(np.arange(self.mesh.nelem), self.ref.nodes, need_jacobian=False)
        return np.asarray(func(x), dtype=float).reshape(-1)

    def __repr__(self):
        return f"DGSpace(degree={self.degree}, nelem={self.mesh.nelem}, ndof={self.ndof})"


@dataclass
class DGSolution:
    space: DGSpace
    coeffs: np.ndarray
    residual: float = 0.0
    converged: bool = True
    iterations: int = 0
    method: str = ""

    @property
    def blocks(self):
        return self.coeffs.reshape(self.space.mesh.nelem, self.space.nloc)


@dataclass
class SparseSystem:
    matrix: object
    rhs: np.ndarray
    space: DGSpace
    block_pairs: np.ndarray = field(repr=False, default=None)
    diag_blocks: np.ndarray = field(repr=False, default=None)

    @property
    def nblocks(self):
        return len(self.block_pairs)


# --------------------------------------------------------------------------------
# quadrature data on element and face batches


@dataclass
class _VolumeChunk:
    elems: np.ndarray
    x: np.ndarray
    wdet: np.ndarray
    Jinv: np.ndarray
    B: np.ndarray
    G: np.ndarray


def _volume_chunks(space, exactness=None, chunk=CHUNK):
    d = space.dim
    rule = volume_quadrature(d, exactness if exactness is not None else space.volume_exactness)
    B = space.ref.eval(rule.points)
    G = space.ref.grad(rule.points)
    E = space.mesh.nelem
    for start in range(0, E, chunk):
        el = np.arange(start, min(E, start + chunk))
        x, J, det = space.gmap.evaluate(el, rule.points)
        yield _VolumeChunk(el, x, det * rule.weights, np.linalg.inv(J), B, G)


@dataclass
class _FaceChunk:
    faces: np.ndarray
    left: np.ndarray
    right: np.ndarray
    x: np.ndarray
    normal: np.ndarray  # outward from the left element
    w: np.ndarray       # physical quadrature weights
    BL: np.ndarray
    BR: Optional[np.ndarray]


def _face_chunks(space, faces, exactness=None, chunk=CHUNK):
    mesh, gmap, ref = space.mesh, space.gmap, space.ref
    d = mesh.dim
    bary, wn = facet_bary_rule(d, exactness if exactness is not None else space.face_exactness)
    Q = len(wn)
    refv = reference_vertices(d)
    nhat = np.array([reference_normal(d, f) for f in range(d + 1)])
    fmeas = np.array([reference_face_measure(d, f) for f in range(d + 1)])
    for start in range(0, len(faces), chunk):
        fc = faces[start:start + chunk]
        nf = len(fc)
        eL = mesh.face_elements[fc, 0]
        eR = mesh.face_elements[fc, 1]
        lfL = mesh.face_local[fc, 0]
        XL = np.einsum("qj,fjd->fqd", bary, refv[mesh.face_perm[fc, 0]])
        x, J, det = gmap.evaluate(eL, XL)
        n, s = frames(J, det, nhat[lfL][:, None, :])
        w = wn[None, :] * fmeas[lfL][:, None] * s
        BL = ref.eval(XL.reshape(-1, d)).reshape(nf, Q, -1)
        BR = None
        if np.all(eR >= 0):
            XR = np.einsum("qj,fjd->fqd", bary, refv[mesh.face_perm[fc, 1]])
            BR = ref.eval(XR.reshape(-1, d)).reshape(nf, Q, -1)
        yield _FaceChunk(fc, eL, eR, x, n, w, BL, BR)


def _boundary_data_points(space, x):
    """Points where boundary data is sampled: ``x`` projected onto the exact boundary."""
    geom = space.geometry
    if geom is None or not geom.curved:
        return x
    return geom.project(x)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(fn, items)
    else:
        yield from map(fn, items)


# --------------------------------------------------------------------------------
# assembly


def assemble(space, problem, threads=1):
    """Assemble the upwind DG system.

    Chunks are evaluated (optionally in threads) and accumulated in a fixed
    order, so the result is bitwise independent of ``threads``.

    Returns
    -------
    SparseSystem
    """
    mesh = space.mesh
    E, n = mesh.nelem, space.nloc
    om = problem.direction
    if om.size != mesh.dim:
        raise ValueError("direction dimension does not match the mesh")
    diag = np.zeros((E, n, n))
    rhs = np.zeros((E, n))

    def volume(ch):
        om_hat = np.einsum("eqab,b->eqa", ch.Jinv, om)
        adv = np.einsum("eqa,qja->eqj", om_hat, ch.G)
        sig = problem.sigma(ch.x)
        tmp = (adv + sig[..., None] * ch.B[None]) * ch.wdet[..., None]
        Ae = np.einsum("qi,eqj->eij", ch.B, tmp)
        be = np.einsum("eq,qi->ei", ch.wdet * problem.source(ch.x), ch.B)
        return ch.elems, Ae, be

    for el, Ae, be in _map(volume, _volume_chunks(space), threads):
        diag[el] += Ae
        rhs[el] += be

    off_rows, off_cols, off_data = [], [], []

    def interior(ch):
        a = ch.normal @ om
        cL = np.where(a < -EPS_CHARACTERISTIC, -a, 0.0) * ch.w
        cR = np.where(a > EPS_CHARACTERISTIC, a, 0.0) * ch.w
        BLc, BRc = ch.BL * cL[..., None], ch.BR * cR[..., None]
        LL = np.einsum("fqi,fqj->fij", BLc, ch.BL)
        LR = -np.einsum("fqi,fqj->fij", BLc, ch.BR)
        RR = np.einsum("fqi,fqj->fij", BRc, ch.BR)
        RL = -np.einsum("fqi,fqj->fij", BRc, ch.BL)
        return ch, LL, LR, RR, RL, np.any(cL > 0, axis=1), np.any(cR > 0, axis=1)

    for ch, LL, LR, RR, RL, hasL, hasR in _map(interior, _face_chunks(space, mesh.interior_faces), threads):
        np.add.at(diag, ch.left, LL)
        np.add.at(diag, ch.right, RR)
        off_rows += [ch.left[hasL], ch.right[hasR]]
        off_cols += [ch.right[hasL], ch.left[hasR]]
        off_data += [LR[hasL], RL[hasR]]

    def boundary(ch):
        a = ch.normal @ om
        c = np.where(a < -EPS_CHARACTERISTIC, -a, 0.0) * ch.w
        BLc = ch.BL * c[..., None]
        M = np.einsum("fqi,fqj->fij", BLc, ch.BL)
        inflow_pts = c > 0
        g = np.zeros_like(c)
        if inflow_pts.any():
            g[inflow_pts] = problem.inflow(_boundary_data_points(space, ch.x[inflow_pts]))
        bvec = np.einsum("fqi,fq->fi", BLc, g)
        return ch.left, M, bvec

    for el, M, bvec in _map(boundary, _face_chunks(space, mesh.boundary_faces), threads):
        np.add.at(diag, el, M)
        np.add.at(rhs, el, bvec)

    brow = np.concatenate([np.arange(E)] + off_rows)
    bcol = np.concatenate([np.arange(E)] + off_cols)
    data = np.concatenate([diag] + [np.asarray(b).reshape(-1, n, n) for b in off_data])
    order = np.lexsort((bcol, brow))
    indptr = np.searchsorted(brow[order], np.arange(E + 1))
    A = bsr_matrix((data[order], bcol[order], indptr), shape=(E * n, E * n), blocksize=(n, n))
    A = A.tocsr()
    A.eliminate_zeros()
    pairs = np.stack([brow[order], bcol[order]], axis=1)
    return SparseSystem(A, rhs.reshape(-1), space, block_pairs=pairs, diag_blocks=diag)


def _coeffs(space, u):
    c = u.coeffs if isinstance(u, DGSolution) else np.asarray(u, dtype=float)
    return c.reshape(space.mesh.nelem, space.nloc)


def apply_bilinear(space, problem, u, v):
    """``B(u, v)`` evaluated through the integrated-by-parts form.

    Uses volume ``(sigma v - Omega.grad v) u``, outflow boundary
    ``(Omega.n) u v`` and interior ``(Omega.n_K) [v] u_upwind`` terms, so it
    is an independent check of the assembled matrix.
    """
    U, V = _coeffs(space, u), _coeffs(space, v)
    om = problem.direction
    mesh = space.mesh
    total = 0.0
    for ch in _volume_chunks(space):
        uq = U[ch.elems] @ ch.B.T
        vq = V[ch.elems] @ ch.B.T
        gv = np.einsum("eqa,ej,qja->eq", np.einsum("eqab,b->eqa", ch.Jinv, om), V[ch.elems], ch.G)
        total += np.sum(ch.wdet * (problem.sigma(ch.x) * vq - gv) * uq)
    for ch in _face_chunks(space, mesh.interior_faces):
        a = ch.normal @ om
        a = np.where(np.abs(a) > EPS_CHARACTERISTIC, a, 0.0)
        uL = np.einsum("fqi,fi->fq", ch.BL, U[ch.left])
        uR = np.einsum("fqi,fi->fq", ch.BR, U[ch.right])
        vL = np.einsum("fqi,fi->fq", ch.BL, V[ch.left])
        vR = np.einsum("fqi,fi->fq", ch.BR, V[ch.right])
        up = np.where(a < 0, uR, uL)
        total += np.sum(ch.w * a * (vL - vR) * up)
    for ch in _face_chunks(space, mesh.boundary_faces):
        a = ch.normal @ om
        a = np.where(a > EPS_CHARACTERISTIC, a, 0.0)
        uL = np.einsum("fqi,fi->fq", ch.BL, U[ch.left])
        vL = np.einsum("fqi,fi->fq", ch.BL, V[ch.left])
        total += np.sum(ch.w * a * uL * vL)
    return float(total)


def dg_norm_terms(space, problem, u, exact=None, exactness=None):
    """Squared DG-norm contributions of ``exact - u`` (or of ``u`` alone).

    Returns ``(volume, boundary, jump)``: ``int sigma e^2``,
    ``1/2 int_{Gamma_h} |Omega.n| e^2`` and ``1/2 int_{interior} |Omega.n| [e]^2``.
    """
    U = _coeffs(space, u)
    om = problem.direction
    mesh = space.mesh
    vex = exactness if exactness is not None else space.volume_exactness + 2
    fex = exactness + 1 if exactness is not None else space.face_exactness + 2
    vol = bnd = jump = 0.0
    for ch in _volume_chunks(space, vex):
        e = U[ch.elems] @ ch.B.T
        if exact is not None:
            e = exact(ch.x) - e
        vol += np.sum(ch.wdet * problem.sigma(ch.x) * e * e)
    for ch in _face_chunks(space, mesh.interior_faces, fex):
        a = np.abs(ch.normal @ om)
        a = np.where(a > EPS_CHARACTERISTIC, a, 0.0)
        jmp = np.einsum("fqi,fi->fq", ch.BL, U[ch.left]) - np.einsum("fqi,fi->fq", ch.BR, U[ch.right])
        jump += 0.5 * np.sum(ch.w * a * jmp * jmp)
    for ch in _face_chunks(space, mesh.boundary_faces, fex):
        a = np.abs(ch.normal @ om)
        a = np.where(a > EPS_CHARACTERISTIC, a, 0.0)
        e = np.einsum("fqi,fi->fq", ch.BL, U[ch.left])
        if exact is not None:
            e = exact(ch.x) - e
        bnd += 0.5 * np.sum(ch.w * a * e * e)
    return float(vol), float(bnd), float(jump)


def dg_norm(space, problem, u, exact=None):
    return float(np.sqrt(sum(dg_norm_terms(space, problem, u, exact))))


@dataclass
class StabilityReport:
    lhs: float
    rhs: float
    terms: dict

    @property
    def ratio(self):
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else np.inf
        return self.lhs / self.rhs


def stability_check(space, problem, solution):
    """Both sides of the discrete stability bound for a computed solution.

    ``lhs = int sigma I^2 + int_{Gamma-} |Omega.n| I^2 + int_{interior} |Omega.n| [I]^2
    + int_{Gamma+} (Omega.n) I^2`` and ``rhs = int f^2 + int_{Gamma-} g^2``.
    """
    U = _coeffs(space, solution)
    om = problem.direction
    mesh = space.mesh
    t = dict(volume=0.0, inflow=0.0, jump=0.0, outflow=0.0, source=0.0, data=0.0)
    for ch in _volume_chunks(space):
        uq = U[ch.elems] @ ch.B.T
        t["volume"] += np.sum(ch.wdet * problem.sigma(ch.x) * uq * uq)
        t["source"] += np.sum(ch.wdet * problem.source(ch.x) ** 2)
    for ch in _face_chunks(space, mesh.interior_faces):
        a = np.abs(ch.normal @ om)
        a = np.where(a > EPS_CHARACTERISTIC, a, 0.0)
        jmp = np.einsum("fqi,fi->fq", ch.BL, U[ch.left]) - np.einsum("fqi,fi->fq", ch.BR, U[ch.right])
        t["jump"] += np.sum(ch.w * a * jmp * jmp)
    for ch in _face_chunks(space, mesh.boundary_faces):
        a = ch.normal @ om
        uq = np.einsum("fqi,fi->fq", ch.BL, U[ch.left])
        inflow = a < -EPS_CHARACTERISTIC
        outflow = a > EPS_CHARACTERISTIC
        t["inflow"] += np.sum((ch.w * -a * uq * uq)[inflow])
        t["outflow"] += np.sum((ch.w * a * uq * uq)[outflow])
        if inflow.any():
            g = problem.inflow(_boundary_data_points(space, ch.x[inflow]))
            t["data"] += np.sum(ch.w[inflow] * g * g)
    t = {k: float(v) for k, v in t.items()}
    lhs = t["volume"] + t["inflow"] + t["jump"] + t["outflow"]
    rhs = t["source"] + t["data"]
    return StabilityReport(lhs, rhs, t)
