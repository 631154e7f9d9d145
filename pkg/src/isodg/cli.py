"""
Command-line driver: ``isodg {study,solve,mesh-info,geometry-check}``.

Studies are described by INI files::

    [study]
    problem = disc2d          ; disc2d | ball3d | square2d | polyhedron3d
    k = 2
    levels = 1, 2, 3, 4       ; or a range such as 1-4
    geometry_kind = curved    ; curved | straight
    solution = manufactured   ; manufactured | constant
    kind = solve              ; solve | projection
    mesh_files =              ; optional comma-separated MSH files, one per level

    [quadrature]
    volume =                  ; exactness override, blank for the default
    face =

    [solver]
    method = direct           ; direct | gmres
    tol = 1e-12
    max_iter =
    restart = 100

    [output]
    csv = results.csv

Exit codes are 0 on success, 2 for configuration errors, 3 for numerical
failures and 4 for I/O errors.  ``ISODG_THREADS`` overrides the assembly
thread count from the config file; ``--threads`` overrides both.
"""
import argparse
import configparser
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import (PROBLEM_ALIASES, PROBLEMS, StudyConfig, StudyError, build_level,
                       dg_error, format_geometry, format_table, geometry_check, l2_error,
                       problem_setup, rows_to_csv, run_study)
from .assembly import DGSpace, Quadrature, assemble, stability_check
from .errors import ConfigParseError, IsoDGError, MeshError, NumericalError
from .solver import SolverConfig, solve

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4
THREADS_ENV = "ISODG_THREADS"

log = logging.getLogger("isodg")


def _key_line(text, section, key):
    """1-based line of ``key`` inside ``[section]``, or None."""
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and "=" in line:
            if line.split("=", 1)[0].strip().lower() == key:
                return no
    return None


def _parse_levels(value):
    levels = []
    for part in value.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            levels.extend(range(int(lo), int(hi) + 1))
        else:
            levels.append(int(part))
    return levels


def parse_config(text, base_dir=None):
    """Parse INI text into ``(StudyConfig, output options)``.

    Raises
    ------
    ConfigParseError
        With ``field`` (and ``line`` when known) naming the offending key.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(f"malformed config: {exc}", line=getattr(exc, "lineno", None)) from exc
    if not parser.has_section("study"):
        raise ConfigParseError("missing [study] section", field="study")

    def get(section, key, conv=str, default=None, required=False):
        sec = parser[section] if parser.has_section(section) else {}
        raw = sec.get(key, "").strip() if key in sec else ""
        if not raw:
            if required:
                raise ConfigParseError(f"missing required field {key!r} in [{section}]", field=key)
            return default
        try:
            return conv(raw)
        except ValueError as exc:
            line = _key_line(text, section, key)
            raise ConfigParseError(f"invalid value for {key!r} (line {line}): {raw!r}",
                                   field=key, line=line) from exc

    problem = get("study", "problem", required=True)
    if PROBLEM_ALIASES.get(problem, problem) not in PROBLEMS:
        line = _key_line(text, "study", "problem")
        raise ConfigParseError(f"unknown problem {problem!r} (line {line})", field="problem", line=line)
    k = get("study", "k", int, required=True)
    mesh_files = get("study", "mesh_files", lambda s: [p.strip() for p in s.split(",") if p.strip()])
    if mesh_files and base_dir is not None:
        mesh_files = [str(Path(base_dir) / p) for p in mesh_files]
    levels = get("study", "levels", _parse_levels, required=not mesh_files) or []
    quad = Quadrature(get("quadrature", "volume", int), get("quadrature", "face", int))
    solver_kw = {}
    for key, conv in (("method", str), ("tol", float), ("max_iter", int), ("restart", int)):
        val = get("solver", key, conv)
        if val is not None:
            solver_kw[key] = val
    fields = dict(
        problem=problem, k=k, levels=levels, mesh_files=mesh_files, quadrature=quad,
        geometry_kind=get("study", "geometry_kind", default="curved"),
        solution=get("study", "solution", default="manufactured"),
        kind=get("study", "kind", default="solve"),
        threads=get("study", "threads", int, default=1),
    )
    try:
        fields["solver"] = SolverConfig(**solver_kw)
        config = StudyConfig(**fields)
    except ValueError as exc:
        key = next((f for f in ("geometry_kind", "solution", "kind", "method", "tol", "levels")
                    if f in str(exc)), None)
        raise ConfigParseError(str(exc), field=key) from exc
    output = {"csv": get("output", "csv")}
    return config, output


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def _threads(args, config):
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigParseError(f"{THREADS_ENV} must be an integer, got {env!r}", field=THREADS_ENV)
    return config.threads


def cmd_study(args):
    config, output = load_config(args.config)
    config.threads = _threads(args, config)
    rows = run_study(config, progress=lambda r: log.info("level %s done", r.level))
    print(format_table(rows))
    csv = rows_to_csv(rows)
    target = args.output or output["csv"]
    if target:
        Path(target).write_text(csv)
        print(f"wrote {target}")
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def cmd_solve(args):
    config, _ = load_config(args.config)
    level = args.level if args.level is not None else config.levels[-1]
    _, problem = problem_setup(config.problem, config.solution)
    try:
        mesh, gmap = build_level(config, level)
        space = DGSpace(gmap, config.k, config.quadrature)
        system = assemble(space, problem, threads=_threads(args, config))
        sol = solve(system, config.solver)
    except IsoDGError as exc:
        raise StudyError(level, exc) from exc
    report = stability_check(space, problem, sol.coeffs)
    print(f"level={level} nelem={mesh.nelem} ndof={space.ndof} method={sol.method} "
          f"iterations={sol.iterations} residual={sol.residual:.3e}")
    print(f"l2_error={l2_error(space, sol.coeffs, problem.exact):.6e} "
          f"dg_error={dg_error(space, problem, sol.coeffs):.6e} "
          f"stability_ratio={report.ratio:.6e}")
    if args.output:
        np.save(args.output, sol.coeffs)
        print(f"wrote {args.output}")
    return EXIT_OK


def cmd_mesh_info(args):
    if args.mesh:
        from .gmsh import load_gmsh

        mesh = load_gmsh(args.mesh)
        print(f"file: {args.mesh}")
    else:
        config, _ = load_config(args.config)
        level = args.level if args.level is not None else config.levels[0]
        mesh, _ = build_level(config, level)
        print(f"problem: {config.problem} level {level}")
    print(f"dimension: {mesh.dim}")
    print(f"vertices: {mesh.nvert}")
    print(f"elements: {mesh.nelem}")
    print(f"faces: {mesh.nfaces} ({len(mesh.boundary_faces)} boundary)")
    print(f"measure: {mesh.element_measures().sum():.12g}")
    print(f"h: {mesh.h:.6e}")
    print(f"quasi-uniformity: {mesh.quasi_uniformity():.4f}")
    return EXIT_OK


def cmd_geometry_check(args):
    config, _ = load_config(args.config)
    print(format_geometry(geometry_check(config)))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="isodg", description="Isoparametric upwind DG transport solver.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--threads", type=int, default=None, help=f"assembly threads (overrides {THREADS_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("study", help="run a convergence study from a config file")
    s.add_argument("config")
    s.add_argument("-o", "--output", help="CSV path (overrides [output] csv)")
    s.set_defaults(func=cmd_study)

    s = sub.add_parser("solve", help="single solve at one level")
    s.add_argument("config")
    s.add_argument("--level", type=int)
    s.add_argument("-o", "--output", help="save coefficients as .npy")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("mesh-info", help="summarize a mesh file or a config level")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--mesh", help="MSH file")
    g.add_argument("--config")
    s.add_argument("--level", type=int)
    s.set_defaults(func=cmd_mesh_info)

    s = sub.add_parser("geometry-check", help="mapped measure and boundary distance per level")
    s.add_argument("config")
    s.set_defaults(func=cmd_geometry_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigParseError as exc:
        where = f" [field {exc.field}]" if exc.field else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StudyError as exc:
        print(f"error at {exc}", file=sys.stderr)
        if isinstance(exc.cause, NumericalError):
            return EXIT_NUMERICAL
        if isinstance(exc.cause, MeshError):
            return EXIT_IO
        return EXIT_FAILURE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, MeshError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IsoDGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
