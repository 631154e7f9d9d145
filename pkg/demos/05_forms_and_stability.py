"""
Checks on the discrete problem itself.

The assembled upwind matrix agrees with the integrated-by-parts form, and
its symmetric part is the DG norm up to quadrature error on curved elements
(their integrands are rational).  The stability ratio stays bounded across
refinements.
"""
import numpy as np

from isodg import (Circle, DGSpace, apply_bilinear, assemble, build_isoparametric_map, dg_norm,
                   generate_disc_mesh, stability_check)
from isodg.problems import disc_problem
from isodg.solver import SolverConfig, solve

circle = Circle((0.0, 0.0), 0.5)
problem = disc_problem()
rng = np.random.default_rng(0)

space = DGSpace(build_isoparametric_map(generate_disc_mesh(1, circle), 2, circle), 2)
system = assemble(space, problem)
u, v = rng.standard_normal((2, space.ndof))
print("v.A u          ", v @ (system.matrix @ u))
print("integrated form", apply_bilinear(space, problem, u, v))
print("u.A u vs |u|^2 ", u @ (system.matrix @ u), dg_norm(space, problem, u) ** 2)

# %% stability ratio per level, direct and GMRES solves
for level in (1, 2, 3, 4):
    space = DGSpace(build_isoparametric_map(generate_disc_mesh(level, circle), 2, circle), 2)
    system = assemble(space, problem)
    direct = solve(system)
    krylov = solve(system, SolverConfig("gmres"))
    rep = stability_check(space, problem, direct.coeffs)
    print(f"level {level}: ratio {rep.ratio:.4f}, gmres iterations {krylov.iterations}, "
          f"max |x_lu - x_gmres| {np.max(np.abs(direct.coeffs - krylov.coeffs)):.1e}")
