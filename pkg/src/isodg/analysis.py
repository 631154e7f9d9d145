"""
Error norms, convergence rates and the study runner.

Rates use the dof-count proxy for the mesh size, ``h ~ Ndof**(-1/d)``::

    rate_i = ln(e_i / e_{i-1}) / ln(h_i / h_{i-1})
"""
import io
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .assembly import DGSpace, Quadrature, _coeffs, _volume_chunks, assemble, dg_norm_terms
from .domain import Circle, Polygonal, Sphere
from .errors import IsoDGError, LengthMismatch, MissingExactSolution, NonpositiveError
from .fem import l2_projection_matrix, volume_quadrature
from .geometry import boundary_distance, build_isoparametric_map, mapped_measure
from .mesh import (generate_ball_mesh, generate_disc_mesh, generate_polyhedron_mesh,
                   generate_square_mesh)
from .problems import ball_problem, constant_problem, disc_problem
from .solver import SolverConfig, solve

log = logging.getLogger(__name__)

PROBLEMS = ("disc2d", "ball3d", "square2d", "polyhedron3d")
PROBLEM_ALIASES = {"polyhedron3d-on-curved": "polyhedron3d"}
GEOMETRY_KINDS = ("curved", "straight")
CSV_HEADER = "level,nelem,ndof,l2_error,l2_rate,dg_error,dg_rate"


def _exact_or_raise(problem, exact):
    exact = exact if exact is not None else problem.exact
    if exact is None:
        raise MissingExactSolution("an exact solution is required for error measurement")
    return exact


def l2_error(space, solution, exact):
    """``sqrt(sum_K int_Khat (u_h - I(F_h))^2 det J)``."""
    if exact is None:
        raise MissingExactSolution("an exact solution is required for the L2 error")
    U = _coeffs(space, solution)
    total = 0.0
    for ch in _volume_chunks(space, space.volume_exactness + 2):
        e = exact(ch.x) - U[ch.elems] @ ch.B.T
        total += np.sum(ch.wdet * e * e)
    return float(np.sqrt(total))


def dg_error(space, problem, solution, exact=None):
    """DG norm of ``I - u_h`` with the exact trace used on ``Gamma_h``."""
    exact = _exact_or_raise(problem, exact)
    return float(np.sqrt(sum(dg_norm_terms(space, problem, solution, exact))))


def reference_projection(space, func):
    """Elementwise L2 projection in reference coordinates (no Jacobian weight).

    Returns the coefficients of ``(P (func o F_h)) o F_h^{-1}``.
    """
    d = space.dim
    rule = volume_quadrature(d, min(2 * space.degree + 2 * space.gmap.degree + 2, 30 if d == 3 else 40))
    M = l2_projection_matrix(space.ref)
    B = space.ref.eval(rule.points)
    x = space.gmap.evaluate(np.arange(space.mesh.nelem), rule.points, need_jacobian=False)
    rhs = (func(x) * rule.weights) @ B
    return np.linalg.solve(M, rhs.T).T.reshape(-1)


def convergence_rate(errors, ndofs, d):
    """Pairwise rates; entry ``i-1`` is the rate between levels ``i-1`` and ``i``."""
    errors = np.asarray(errors, dtype=float)
    ndofs = np.asarray(ndofs, dtype=float)
    if errors.shape != ndofs.shape:
        raise LengthMismatch(f"{errors.size} errors vs {ndofs.size} dof counts")
    if errors.size < 2:
        raise LengthMismatch("at least two levels are needed for a rate")
    if np.any(errors <= 0) or np.any(ndofs <= 0):
        raise NonpositiveError("errors and dof counts must be positive")
    h = ndofs ** (-1.0 / d)
    return list(np.log(errors[1:] / errors[:-1]) / np.log(h[1:] / h[:-1]))


def least_squares_rate(errors, ndofs, d):
    """Slope of ``log e`` against ``log h`` over all levels."""
    h = np.asarray(ndofs, dtype=float) ** (-1.0 / d)
    return float(np.polyfit(np.log(h), np.log(np.asarray(errors, dtype=float)), 1)[0])


# -------------------------------------------------------------------------------
# studies


@dataclass
class StudyConfig:
    problem: str
    k: int
    levels: List[int]
    geometry_kind: str = "curved"
    solution: str = "manufactured"
    kind: str = "solve"  # or "projection"
    quadrature: Quadrature = field(default_factory=Quadrature)
    solver: SolverConfig = field(default_factory=SolverConfig)
    mesh_files: Optional[List[str]] = None
    threads: int = 1

    def __post_init__(self):
        self.problem = PROBLEM_ALIASES.get(self.problem, self.problem)
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if self.geometry_kind not in GEOMETRY_KINDS:
            raise ValueError(f"geometry_kind must be one of {GEOMETRY_KINDS}")
        if self.kind not in ("solve", "projection"):
            raise ValueError("kind must be 'solve' or 'projection'")
        if self.solution not in ("manufactured", "constant"):
            raise ValueError("solution must be 'manufactured' or 'constant'")
        if self.mesh_files:
            self.levels = list(range(len(self.mesh_files)))
        if len(self.levels) < 2:
            raise ValueError("a study needs at least 2 levels")

    @property
    def dim(self):
        return 2 if self.problem in ("disc2d", "square2d") else 3


@dataclass
class StudyRow:
    level: int
    nelem: int
    ndof: int
    l2_error: float
    l2_rate: Optional[float]
    dg_error: float
    dg_rate: Optional[float]
    seconds: float = 0.0


class StudyError(IsoDGError):
    def __init__(self, level, cause):
        super().__init__(f"level {level}: {type(cause).__name__}: {cause}")
        self.level = level
        self.cause = cause


def problem_setup(name, solution="manufactured"):
    """``(exact geometry, transport problem)`` for a named study problem."""
    if name == "disc2d":
        geom, prob = Circle((0.0, 0.0), 0.5), disc_problem()
    elif name == "square2d":
        geom, prob = Polygonal.unit_square(), disc_problem()
    elif name in ("ball3d", "polyhedron3d"):
        geom, prob = Sphere((0.0, 0.0, 0.0), 1.0), ball_problem()
    else:
        raise ValueError(f"unknown problem {name!r}")
    if solution == "constant":
        prob = constant_problem(prob.direction)
    return geom, prob


def build_level(config, level):
    """Mesh and geometric map for one level of a study."""
    geom, _ = problem_setup(config.problem, config.solution)
    if config.mesh_files:
        from .gmsh import load_gmsh

        mesh = load_gmsh(config.mesh_files[level])
    elif config.problem == "disc2d":
        mesh = generate_disc_mesh(level, geom)
    elif config.problem == "square2d":
        mesh = generate_square_mesh(level, geom)
    elif config.problem == "ball3d":
        mesh = generate_ball_mesh(level, geom)
    else:
        mesh, geom = generate_polyhedron_mesh(level, geom)
    gdeg = config.k if config.geometry_kind == "curved" else 1
    gdeg = max(1, min(gdeg, 4))
    gmap = build_isoparametric_map(mesh, gdeg, geom)
    return mesh, gmap


def run_level(config, level):
    """Errors for one level; returns ``(nelem, ndof, l2, dg)``."""
    _, problem = problem_setup(config.problem, config.solution)
    mesh, gmap = build_level(config, level)
    space = DGSpace(gmap, config.k, config.quadrature)
    if config.kind == "projection":
        coeffs = reference_projection(space, problem.exact)
    else:
        system = assemble(space, problem, threads=config.threads)
        coeffs = solve(system, config.solver).coeffs
    l2 = l2_error(space, coeffs, problem.exact)
    dg = dg_error(space, problem, coeffs)
    return mesh.nelem, space.ndof, l2, dg


def run_study(config, progress=None):
    """Run every level of ``config`` and attach pairwise rates."""
    rows = []
    for level in config.levels:
        t0 = time.perf_counter()
        try:
            nelem, ndof, l2, dg = run_level(config, level)
        except IsoDGError as exc:
            raise StudyError(level, exc) from exc
        row = StudyRow(level, nelem, ndof, l2, None, dg, None, time.perf_counter() - t0)
        if rows:
            prev = rows[-1]
            d = config.dim
            if l2 > 0 and prev.l2_error > 0:
                row.l2_rate = convergence_rate([prev.l2_error, l2], [prev.ndof, ndof], d)[0]
            if dg > 0 and prev.dg_error > 0:
                row.dg_rate = convergence_rate([prev.dg_error, dg], [prev.ndof, ndof], d)[0]
        rows.append(row)
        log.info("level %s: nelem=%d l2=%.4e dg=%.4e (%.1fs)", level, nelem, l2, dg, row.seconds)
        if progress is not None:
            progress(row)
    return rows


def _fmt(v):
    return "" if v is None else f"{v:.5e}"


def rows_to_csv(rows):
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for r in rows:
        out.write(",".join([str(r.level), str(r.nelem), str(r.ndof), _fmt(r.l2_error),
                            _fmt(r.l2_rate), _fmt(r.dg_error), _fmt(r.dg_rate)]) + "\n")
    return out.getvalue()


def format_table(rows):
    lines = [f"{'level':>5} {'Nelem':>8} {'Ndof':>9} {'L2 error':>12} {'L2 rate':>8} "
             f"{'DG error':>12} {'DG rate':>8}"]
    for r in rows:
        l2r = "-" if r.l2_rate is None else f"{r.l2_rate:.4f}"
        dgr = "-" if r.dg_rate is None else f"{r.dg_rate:.4f}"
        lines.append(f"{r.level:>5} {r.nelem:>8} {r.ndof:>9} {r.l2_error:>12.4e} {l2r:>8} "
                     f"{r.dg_error:>12.4e} {dgr:>8}")
    return "\n".join(lines)


# -------------------------------------------------------------------------------
# geometry diagnostics


@dataclass
class GeometryRow:
    level: int
    nelem: int
    measure_error: float
    boundary_distance: float
    measure_rate: Optional[float] = None
    distance_rate: Optional[float] = None


def geometry_check(config):
    """Mapped-measure error and boundary distance per level, with orders in ``h``."""
    rows = []
    geom0, _ = problem_setup(config.problem)
    for level in config.levels:
        mesh, gmap = build_level(config, level)
        geom = gmap.geometry if gmap.geometry is not None else geom0
        exact_measure = geom.measure
        err = abs(mapped_measure(gmap) - exact_measure)
        dist = boundary_distance(gmap, geom)
        row = GeometryRow(level, mesh.nelem, err, dist)
        if rows:
            prev = rows[-1]
            for attr, rate in (("measure_error", "measure_rate"), ("boundary_distance", "distance_rate")):
                a, b = getattr(prev, attr), getattr(row, attr)
                if a > 0 and b > 0:
                    setattr(row, rate, convergence_rate([a, b], [prev.nelem, row.nelem], mesh.dim)[0])
        rows.append(row)
    return rows


def format_geometry(rows):
    lines = [f"{'level':>5} {'Nelem':>8} {'|meas err|':>12} {'order':>7} {'bdry dist':>12} {'order':>7}"]
    for r in rows:
        mr = "-" if r.measure_rate is None else f"{r.measure_rate:.3f}"
        dr = "-" if r.distance_rate is None else f"{r.distance_rate:.3f}"
        lines.append(f"{r.level:>5} {r.nelem:>8} {r.measure_error:>12.4e} {mr:>7} "
                     f"{r.boundary_distance:>12.4e} {dr:>7}")
    return "\n".join(lines)
