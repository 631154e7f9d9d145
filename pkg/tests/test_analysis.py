import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isodg import DGSpace, Polygonal, StudyConfig, build_isoparametric_map, generate_square_mesh
from isodg.analysis import (CSV_HEADER, StudyError, convergence_rate, dg_error, l2_error,
                            least_squares_rate, reference_projection, rows_to_csv, run_study)
from isodg.errors import (LengthMismatch, MaxIterationsExceeded, MissingExactSolution,
                          NonpositiveError)
from isodg.problems import constant_problem
from isodg.solver import SolverConfig


def test_rate_from_published_k2_rows():
    assert convergence_rate([3.3747e-3, 4.5822e-4], [192, 714], 2)[0] == pytest.approx(3.04, abs=0.01)


def test_rate_from_published_k3_rows():
    assert convergence_rate([1.2164e-3, 9.3544e-5], [320, 1190], 2)[0] == pytest.approx(3.91, abs=0.01)


def test_rate_halving():
    # h halves when Ndof quadruples in 2D
    assert convergence_rate([1.0, 0.5], [100, 400], 2) == [pytest.approx(1.0, abs=1e-14)]
    assert least_squares_rate([1.0, 0.25, 0.0625], [8, 64, 512], 3) == pytest.approx(2.0)


def test_rate_errors():
    with pytest.raises(LengthMismatch):
        convergence_rate([1.0, 0.5], [10], 2)
    with pytest.raises(LengthMismatch):
        convergence_rate([1.0], [10], 2)
    with pytest.raises(NonpositiveError):
        convergence_rate([1.0, 0.0], [10, 40], 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-12, 1.0), min_size=2, max_size=6), st.floats(1e-6, 1e6),
       st.sampled_from([2, 3]))
def test_rate_invariant_under_error_scaling(errors, scale, d):
    ndofs = [10 * 4**i for i in range(len(errors))]
    a = convergence_rate(errors, ndofs, d)
    b = convergence_rate([scale * e for e in errors], ndofs, d)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)


def square_space(k):
    return DGSpace(build_isoparametric_map(generate_square_mesh(1), 1, Polygonal.unit_square()), k)


def test_error_norms_of_trivial_cases():
    space = square_space(2)
    problem = constant_problem(np.array([1.0, 0.0]))
    zero = np.zeros(space.ndof)
    assert l2_error(space, zero, problem.exact) == pytest.approx(1.0, abs=1e-13)
    assert l2_error(space, np.ones(space.ndof), problem.exact) <= 1e-12
    assert dg_error(space, problem, np.ones(space.ndof)) <= 1e-12
    with pytest.raises(MissingExactSolution):
        l2_error(space, zero, None)


def test_projection_reproduces_space_members():
    space = square_space(2)
    f = lambda x: 1 + x[..., 0] - 2 * x[..., 1] ** 2 + x[..., 0] * x[..., 1]  # noqa: E731
    coeffs = reference_projection(space, f)
    assert l2_error(space, coeffs, f) <= 1e-11


def test_projection_study_rates():
    rows = run_study(StudyConfig("disc2d", 2, [1, 2, 3, 4], kind="projection"))
    assert rows[-1].dg_rate >= 2.2
    assert rows[-1].l2_rate >= 2.7


def test_study_rows_and_csv():
    rows = run_study(StudyConfig("disc2d", 2, [1, 2, 3]))
    assert [r.ndof for r in rows] == [r.nelem * 6 for r in rows]
    assert rows[0].l2_rate is None and rows[1].l2_rate is not None
    lines = rows_to_csv(rows).splitlines()
    assert lines[0] == CSV_HEADER == "level,nelem,ndof,l2_error,l2_rate,dg_error,dg_rate"
    first = lines[1].split(",")
    assert first[4] == "" and first[6] == ""
    assert first[3] == f"{rows[0].l2_error:.5e}"
    assert len(lines) == 4


def test_study_config_validation():
    with pytest.raises(ValueError):
        StudyConfig("disc2d", 2, [1])
    with pytest.raises(ValueError):
        StudyConfig("torus", 2, [1, 2])
    assert StudyConfig("polyhedron3d-on-curved", 2, [0, 1]).problem == "polyhedron3d"


def test_study_error_names_level():
    with pytest.raises(StudyError) as info:
        run_study(StudyConfig("disc2d", 2, [1, 2],
                              solver=SolverConfig("gmres", tol=1e-14, max_iter=1, restart=1)))
    assert info.value.level == 1
    assert isinstance(info.value.cause, MaxIterationsExceeded)
