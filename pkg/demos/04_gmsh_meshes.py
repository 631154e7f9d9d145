"""
Reading Gmsh files.

The package ships the 48-tetrahedron ball and three disc levels as MSH 2.2
files.  A study can run on a list of such files instead of built-in levels.
"""
import tempfile
from importlib.resources import files
from pathlib import Path

from isodg import StudyConfig, Sphere, load_gmsh, run_study, write_gmsh
from isodg.analysis import format_table

data = files("isodg") / "data"
ball = load_gmsh(data / "ball48.msh")
print(ball, "boundary faces:", len(ball.boundary_faces))
print("max |phi| on boundary vertices:", ball.check_boundary_on(Sphere()))

# %% writing is byte-stable: load -> write reproduces the file
with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "ball.msh"
    write_gmsh(ball, out)
    print("round trip identical:", out.read_text() == (data / "ball48.msh").read_text())

# %% a study on the shipped disc files
paths = [str(data / f"disc_l{i}.msh") for i in (1, 2, 3)]
print(format_table(run_study(StudyConfig("disc2d", k=2, levels=[], mesh_files=paths))))
