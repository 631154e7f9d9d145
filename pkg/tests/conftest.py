import numpy as np
import pytest

from isodg import Circle, Sphere, generate_disc_mesh, build_isoparametric_map


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def circle():
    return Circle((0.0, 0.0), 0.5)


@pytest.fixture(scope="session")
def sphere():
    return Sphere((0.0, 0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def disc_map_k2(circle):
    return build_isoparametric_map(generate_disc_mesh(2, circle), 2, circle)


def random_simplex_points(rng, d, n):
    """Uniform points in the reference simplex."""
    x = rng.dirichlet(np.ones(d + 1), size=n)
    return x[:, 1:]


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
