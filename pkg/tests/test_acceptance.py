"""
Acceptance suite: one test per criterion, each recording a PASS/FAIL line
that is repeated in the terminal summary.
"""
import time
from importlib.resources import files
from itertools import product
from math import factorial, prod

import numpy as np
import pytest

from isodg import (Circle, DGSpace, Mesh, Polygonal, Sphere, StudyConfig, apply_bilinear, assemble,
                   build_isoparametric_map, convergence_rate, dg_error, generate_ball_mesh,
                   generate_disc_mesh, generate_polyhedron_mesh, generate_square_mesh, l2_error,
                   load_gmsh, mapped_measure, run_study, stability_check)
from isodg.fem import MAX_EXACTNESS, facet_bary_rule, simplex_monomial_integral, volume_quadrature
from isodg.geometry import boundary_distance
from isodg.problems import (BALL_DIRECTION, DISC_DIRECTION, constant_problem, disc_problem,
                            polynomial_problem)
from isodg.solver import SolverConfig, solve

GMRES = SolverConfig("gmres", tol=1e-12)


def fmt(rates):
    return "[" + ", ".join(f"{r:.3f}" for r in rates) + "]"


def timed_study(config):
    t0 = time.perf_counter()
    rows = run_study(config)
    return rows, time.perf_counter() - t0


@pytest.fixture(scope="module")
def ball_studies():
    curved = timed_study(StudyConfig("ball3d", 2, [0, 1, 2], geometry_kind="curved", solver=GMRES))
    straight = timed_study(StudyConfig("ball3d", 2, [0, 1, 2], geometry_kind="straight", solver=GMRES))
    return curved, straight


def test_criterion_01_disc_k2_rates(report):
    rows, secs = timed_study(StudyConfig("disc2d", 2, [1, 2, 3, 4, 5]))
    l2, dg = rows[-1].l2_rate, rows[-1].dg_rate
    ok = 2.7 <= l2 <= 3.3 and 2.2 <= dg <= 2.8 and secs <= 120
    assert report(1, "disc k=2 rates", ok, f"L2 {l2:.3f} in [2.7,3.3], DG {dg:.3f} in [2.2,2.8], {secs:.1f}s <= 120s")


def test_criterion_02_disc_k3_rates(report):
    rows, secs = timed_study(StudyConfig("disc2d", 3, [1, 2, 3, 4, 5]))
    l2, dg = rows[-1].l2_rate, rows[-1].dg_rate
    ok = 3.7 <= l2 <= 4.3 and 3.2 <= dg <= 3.8 and secs <= 300
    assert report(2, "disc k=3 rates", ok, f"L2 {l2:.3f} in [3.7,4.3], DG {dg:.3f} in [3.2,3.8], {secs:.1f}s <= 300s")


def test_criterion_03_ball_curved_dg_trend(report, ball_studies):
    (rows, secs), _ = ball_studies
    dg = [r.dg_rate for r in rows[1:]]
    ok = dg[-1] >= 2.1 and all(b > a for a, b in zip(dg, dg[1:])) and secs <= 900
    assert report(3, "ball curved k=2 DG trend", ok,
                  f"Nelem {[r.nelem for r in rows]}, DG rates {fmt(dg)} (final >= 2.1, increasing), {secs:.1f}s")


def test_criterion_04_ball_straight_degradation(report, ball_studies):
    (curved, _), (straight, _) = ball_studies
    s, c = straight[-1].l2_rate, curved[-1].l2_rate
    ok = s <= 2.3 and s < c
    assert report(4, "ball straight-map L2 degradation", ok, f"straight L2 {s:.3f} <= 2.3 and < curved L2 {c:.3f}")


def constant_cases():
    circle, sphere = Circle((0.0, 0.0), 0.5), Sphere()
    data = files("isodg") / "data"
    poly, hull = generate_polyhedron_mesh(1, sphere)
    yield "disc", generate_disc_mesh(2, circle), circle
    yield "ball", generate_ball_mesh(1, sphere), sphere
    yield "square", generate_square_mesh(2), Polygonal.unit_square()
    yield "polyhedron", poly, hull
    yield "disc msh", load_gmsh(data / "disc_l2.msh"), circle
    yield "ball msh", load_gmsh(data / "ball48.msh"), sphere


def test_criterion_05_constant_exactness(report):
    worst = 0.0
    for _, mesh, geom in constant_cases():
        problem = constant_problem(DISC_DIRECTION if mesh.dim == 2 else BALL_DIRECTION)
        for k in (1, 2, 3):
            space = DGSpace(build_isoparametric_map(mesh, k, geom), k)
            u = solve(assemble(space, problem)).coeffs
            worst = max(worst, l2_error(space, u, problem.exact), dg_error(space, problem, u))
    ok = worst <= 1e-10
    assert report(5, "constant exactness", ok, f"max L2/DG error {worst:.2e} <= 1e-10 over 6 mesh families, k=1..3")


def test_criterion_06_polynomial_exactness(report):
    worst = 0.0
    square = Polygonal.unit_square()
    for k in (1, 2, 3):
        space = DGSpace(build_isoparametric_map(generate_square_mesh(2), 1, square), k)
        problem = polynomial_problem(DISC_DIRECTION, k, seed=11 + k)
        u = solve(assemble(space, problem)).coeffs
        worst = max(worst, dg_error(space, problem, u))
    ok = worst <= 1e-9
    assert report(6, "polynomial exactness", ok, f"max DG error {worst:.2e} <= 1e-9, k=1..3")


def test_criterion_07_form_equivalence(report):
    circle = Circle((0.0, 0.0), 0.5)
    r = 0.5 / np.sqrt(2)
    mesh = Mesh([[0, 0], [0.5, 0], [r, r], [0, 0.5]], [[0, 1, 2], [0, 2, 3]])
    worst = 0.0
    problem = disc_problem()
    for k in (1, 2, 3):
        space = DGSpace(build_isoparametric_map(mesh, k, circle), k)
        A = assemble(space, problem).matrix.toarray()
        I = np.eye(space.ndof)
        B = np.array([[apply_bilinear(space, problem, I[j], I[i]) for j in range(space.ndof)]
                      for i in range(space.ndof)])
        worst = max(worst, np.max(np.abs(A - B)))
    ok = worst <= 1e-10
    assert report(7, "upwind vs integrated form", ok, f"max entry difference {worst:.2e} <= 1e-10 (curved 2-element mesh, k=1..3)")


def test_criterion_08_stability_ratio(report):
    circle = Circle((0.0, 0.0), 0.5)
    problem = disc_problem()
    ratios = []
    for level in (1, 2, 3, 4):
        space = DGSpace(build_isoparametric_map(generate_disc_mesh(level, circle), 2, circle), 2)
        u = solve(assemble(space, problem)).coeffs
        ratios.append(stability_check(space, problem, u).ratio)
    spread = max(ratios) / min(ratios)
    monotone_growth = all(b > a for a, b in zip(ratios, ratios[1:])) and spread > 1.5
    ok = spread <= 3 and not monotone_growth
    assert report(8, "stability ratio", ok, f"LHS/RHS per level {fmt(ratios)}, max/min {spread:.4f} <= 3")


def test_criterion_09_projection_rates(report):
    rows = run_study(StudyConfig("disc2d", 2, [1, 2, 3, 4], kind="projection"))
    dg, l2 = rows[-1].dg_rate, rows[-1].l2_rate
    ok = dg >= 2.2 and l2 >= 2.7
    assert report(9, "projection error rates", ok, f"DG {dg:.3f} >= 2.2, L2 {l2:.3f} >= 2.7")


def test_criterion_10_geometry_orders(report):
    circle = Circle((0.0, 0.0), 0.5)
    details, ok = [], True
    for k in (1, 2, 3):
        dist, area, nelem = [], [], []
        for level in (1, 2, 3, 4):
            gmap = build_isoparametric_map(generate_disc_mesh(level, circle), k, circle)
            dist.append(boundary_distance(gmap, circle))
            area.append(abs(mapped_measure(gmap) - np.pi / 4))
            nelem.append(gmap.mesh.nelem)
        od = convergence_rate(dist, nelem, 2)[-1]
        oa = convergence_rate(area, nelem, 2)[-1]
        ok &= od >= k + 1 - 0.3 and oa >= k + 0.7
        details.append(f"k={k}: distance {od:.2f} >= {k + 0.7:.1f}, area {oa:.2f} >= {k + 0.7:.1f}")
    assert report(10, "geometry orders", ok, "; ".join(details))


def test_criterion_11_quadrature_sweep(report):
    worst = 0.0
    count = 0
    for d in (2, 3):
        for ex in range(MAX_EXACTNESS[d] + 1):
            rule = volume_quadrature(d, ex)
            E = np.array([e for e in product(range(ex + 1), repeat=d) if sum(e) <= ex])
            got = np.prod(rule.points[:, None, :] ** E[None], axis=2).T @ rule.weights
            exact = np.array([simplex_monomial_integral(e) for e in E])
            worst = max(worst, np.max(np.abs(got - exact) / exact))
            count += 1
        for ex in range(MAX_EXACTNESS[d - 1] + 1):
            bary, w = facet_bary_rule(d, ex)
            # monomials in the free barycentric coordinates of the facet simplex
            E = np.array([e for e in product(range(ex + 1), repeat=d - 1) if sum(e) <= ex])
            got = np.prod(bary[:, None, 1:] ** E[None], axis=2).T @ w
            exact = np.array([factorial(d - 1) * prod(factorial(int(a)) for a in e) / factorial(int(sum(e)) + d - 1)
                              for e in E])
            worst = max(worst, np.max(np.abs(got - exact) / exact))
            count += 1
    ok = worst <= 1e-12
    assert report(11, "quadrature monomial sweep", ok, f"{count} rules, worst relative error {worst:.2e} <= 1e-12")


def test_criterion_12_rate_formula(report):
    rate = convergence_rate([3.3747e-3, 4.5822e-4], [192, 714], 2)[0]
    ok = abs(rate - 3.04) <= 0.01
    assert report(12, "rate formula", ok, f"{rate:.4f} = 3.04 +- 0.01")
