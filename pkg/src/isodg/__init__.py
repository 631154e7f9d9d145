"""
Upwind discontinuous Galerkin solver for steady single-direction radiation
transport ``Omega . grad I + sigma I = f`` on curved domains, using
isoparametric simplicial elements.
"""
from .analysis import (StudyConfig, StudyRow, convergence_rate, dg_error, geometry_check,
                       l2_error, reference_projection, run_study)
from .assembly import (DGSpace, Quadrature, TransportProblem, apply_bilinear, assemble,
                       classify_face_point, dg_norm, stability_check)
from .domain import Ball, Circle, Implicit, Polygonal, Sphere
from .errors import *  # noqa: F401,F403
from .geometry import build_isoparametric_map, mapped_measure, straight_map
from .gmsh import load_gmsh, read_msh, write_gmsh
from .mesh import (Mesh, generate_ball_mesh, generate_disc_mesh, generate_polyhedron_mesh,
                   generate_square_mesh, refine_mesh)
from .solver import SolverConfig, solve

__version__ = "0.1.0"
