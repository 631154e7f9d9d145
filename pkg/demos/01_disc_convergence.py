"""
Convergence on the disc of radius 1/2.

The manufactured solution I = sin(pi x + pi y) + x^2 + y^2 + xy + 5 is
transported along Omega = (sqrt3/2, 1/2) with sigma = 1.  Each level is a
red refinement of an 8-triangle fan; rates use h ~ Ndof^(-1/2).
"""
from isodg import StudyConfig, run_study
from isodg.analysis import format_table

# %% quadratic elements on a quadratic geometry: expect ~3 in L2, ~2.5 in DG
rows = run_study(StudyConfig("disc2d", k=2, levels=[1, 2, 3, 4, 5]))
print(format_table(rows))

# %% cubic elements: the blended map keeps the geometry from limiting the rate
rows = run_study(StudyConfig("disc2d", k=3, levels=[1, 2, 3, 4]))
print(format_table(rows))
