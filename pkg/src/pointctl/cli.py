"""Command-line front end.

Usage::

    pointctl <command> --config <path> [--levels N] [--nu X] [--out DIR]
             [--format csv,vtk,txt]

with commands ``solve``, ``eoc``, ``approx-eoc``, ``newton-table`` and
``nu-sweep``.  The config file is plain ``key=value`` lines; command-line
flags override config values.  Exit codes: 0 success, 2 config error,
3 solver failure.
"""

import argparse
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from typing import Optional, Tuple

import numpy as np

from . import bench
from .assembly import DofMap
from .errors import (
    Breakdown,
    MaxIterations,
    NoConvergence,
    ParseError,
    PointctlError,
    ValidationError,
)
from .fileio import write_legacy_vtk
from .mesh import build_unit_ball, build_unit_disk, mesh_size
from .optctl import ProblemSpec, solve

COMMANDS = ("solve", "eoc", "approx-eoc", "newton-table", "nu-sweep")
PROBLEMS = ("benchmark2d", "benchmark3d", "constrained2d", "fivepoint", "custom")
DOMAINS = ("square", "disk", "ball")
FORMATS = ("csv", "txt", "vtk")

DEFAULT_NUS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class RunConfig:
    command: str = ""
    problem: str = ""
    levels: int = 4
    fine_level: Optional[int] = None
    nu: Optional[float] = None
    nus: Tuple[float, ...] = DEFAULT_NUS
    bounds: Optional[Tuple[float, float]] = None
    points: Optional[Tuple[Tuple[float, ...], ...]] = None
    domain: str = "square"
    quad_degree: int = 10
    tol: float = 1e-8
    output_dir: str = "."
    formats: Tuple[str, ...] = ("csv", "txt", "vtk")


def _parse_bounds(text):
    if text.strip().lower() == "none":
        return None
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError("bounds must be 'a,b' or 'none'")
    return (float(parts[0]), float(parts[1]))


def _parse_points(text):
    pts = []
    for block in text.strip().strip(";").split(";"):
        vals = tuple(float(v) for v in block.split(","))
        if len(vals) not in (3, 4):
            raise ValueError("each point is 'x,y,g' (2D) or 'x,y,z,g' (3D)")
        pts.append(vals)
    return tuple(pts)


def _parse_formats(text):
    fmts = tuple(f.strip() for f in text.split(",") if f.strip())
    for f in fmts:
        if f not in FORMATS:
            raise ValueError(f"unknown format {f!r}")
    return fmts


_PARSERS = {
    "command": str,
    "problem": str,
    "levels": int,
    "fine_level": int,
    "nu": float,
    "nus": lambda s: tuple(float(v) for v in s.split(",")),
    "bounds": _parse_bounds,
    "points": _parse_points,
    "domain": str,
    "quad_degree": int,
    "tol": float,
    "output_dir": str,
    "formats": _parse_formats,
}


def parse_config(text):
    """Parse key=value config text into a validated RunConfig."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _PARSERS:
            raise ParseError(f"unknown key {key!r}", lineno)
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            raise ParseError(f"bad value for {key!r}: {exc}", lineno) from exc
    config = RunConfig(**values)
    validate_config(config)
    return config


def validate_config(config):
    if config.command and config.command not in COMMANDS:
        raise ValidationError(f"command must be one of {COMMANDS}, got {config.command!r}")
    if config.problem and config.problem not in PROBLEMS:
        raise ValidationError(f"problem must be one of {PROBLEMS}, got {config.problem!r}")
    if config.nu is not None and not config.nu > 0:
        raise ValidationError("nu must be positive")
    if any(v <= 0 for v in config.nus):
        raise ValidationError("all nus must be positive")
    if config.bounds is not None and not config.bounds[0] < config.bounds[1]:
        raise ValidationError("bounds must satisfy a < b")
    if config.levels < 1:
        raise ValidationError("levels must be >= 1")
    if not 1 <= config.quad_degree <= 10:
        raise ValidationError("quad_degree must be in [1, 10]")
    if not config.tol > 0:
        raise ValidationError("tol must be positive")
    if config.domain not in DOMAINS:
        raise ValidationError(f"domain must be one of {DOMAINS}")
    if config.points is not None:
        dim = 3 if config.domain == "ball" else 2
        for p in config.points:
            if len(p) != dim + 1:
                raise ValidationError(f"point {p} does not match domain dimension {dim}")


def render_config(config):
    """Inverse of parse_config: render a config as key=value text."""
    lines = []
    for f in fields(RunConfig):
        val = getattr(config, f.name)
        if val is None:
            if f.name in ("bounds",):
                lines.append(f"{f.name}=none")
            continue
        if f.name in ("nus",):
            lines.append(f"{f.name}=" + ",".join(f"{v:.12g}" for v in val))
        elif f.name == "bounds":
            lines.append(f"bounds={val[0]:.12g},{val[1]:.12g}")
        elif f.name == "points":
            lines.append(
                "points=" + ";".join(",".join(f"{v:.12g}" for v in p) for p in val)
            )
        elif f.name == "formats":
            lines.append("formats=" + ",".join(val))
        elif isinstance(val, float):
            lines.append(f"{f.name}={val:.12g}")
        else:
            lines.append(f"{f.name}={val}")
    return "\n".join(lines) + "\n"


def _custom_builder(config):
    if config.points is None:
        raise ValidationError("custom problems need a points=... entry")
    lower, upper = config.bounds if config.bounds else (-math.inf, math.inf)
    nu = config.nu if config.nu is not None else 1.0

    def builder(level):
        if config.domain == "square":
            mesh = bench._square_mesh(level)
        elif config.domain == "disk":
            mesh = build_unit_disk(level)
        else:
            mesh = build_unit_ball(level)
        pts = [(tuple(p[:-1]), p[-1]) for p in config.points]
        return ProblemSpec(
            mesh=mesh, dofmap=DofMap(mesh), nu=nu, lower=lower, upper=upper, points=pts
        )

    return builder


def _resolve_builder(config):
    """Problem name -> (spec builder over mesh levels, exact benchmark or None)."""
    name = config.problem
    if name == "benchmark2d":
        bm = bench.benchmark_2d()
        return bm.spec_builder, bm
    if name == "benchmark3d":
        bm = bench.benchmark_3d()
        return bm.spec_builder, bm
    if name == "constrained2d":
        def builder(level):
            spec = bench.constrained_2d(level)
            return _apply_overrides(spec, config)

        return builder, None
    if name == "fivepoint":
        nu = config.nu if config.nu is not None else 1e-4
        return (lambda level: bench.five_point_square(nu=nu, level=level)), None
    if name == "custom":
        return _custom_builder(config), None
    raise ValidationError("config needs a problem=... entry")


def _apply_overrides(spec, config):
    changed = {}
    if config.bounds is not None:
        changed["lower"], changed["upper"] = config.bounds
    if config.nu is not None:
        changed["nu"] = config.nu
    if changed:
        spec = replace(spec, _cache={}, **changed)
    return spec


def _write(config, stem, text_by_ext):
    os.makedirs(config.output_dir, exist_ok=True)
    written = []
    for ext, text in text_by_ext.items():
        if ext in config.formats:
            path = os.path.join(config.output_dir, f"{stem}.{ext}")
            with open(path, "w") as fh:
                fh.write(text)
            written.append(path)
    return written


def _run_solve(config, builder):
    spec = builder(config.levels)
    sol = solve(spec, tol=config.tol)
    mesh = spec.mesh
    summary = [
        f"mesh: {mesh.num_vertices} vertices, {mesh.num_cells} cells, h = {mesh_size(mesh):.6g}",
        f"newton iterations: {sol.report.iterations}",
        f"final residual: {sol.report.residual_norms[-1]:.6g}",
    ]
    for (pt, g, vec) in spec.point_vectors():
        yval = float(vec @ sol.y.coefficients)
        summary.append(f"y{pt} = {yval:.9g} (target {g:g})")
    text = "\n".join(summary) + "\n"
    print(text, end="")
    _write(config, "solve", {"txt": text})
    if "vtk" in config.formats:
        os.makedirs(config.output_dir, exist_ok=True)
        note = (
            "control sampled at vertices; the projected control is not a P1 "
            "function where a bound is active"
        )
        for name, values, comment in (
            ("y", sol.y.padded(), "state"),
            ("p", sol.p.padded(), "adjoint"),
            ("u", sol.control.vertex_samples(), note),
        ):
            path = os.path.join(config.output_dir, f"solution_{name}.vtk")
            write_legacy_vtk(mesh, path, point_data={name: values}, comment=comment)
    return 0


def _run_eoc(config, builder, benchmark):
    if benchmark is None:
        raise ValidationError(
            "eoc needs a problem with an exact solution; use approx-eoc instead"
        )
    records = bench.eoc_study(benchmark, config.levels)
    print(bench.records_to_text(records), end="")
    _write(config, "eoc", {
        "csv": bench.records_to_csv(records),
        "txt": bench.records_to_text(records),
    })
    return 0


def _run_approx_eoc(config, builder):
    records = bench.approx_eoc_study(builder, config.levels, config.fine_level)
    print(bench.records_to_text(records), end="")
    _write(config, "approx-eoc", {
        "csv": bench.records_to_csv(records),
        "txt": bench.records_to_text(records),
    })
    return 0


def _run_newton_table(config, builder):
    spec = builder(config.levels)
    records = bench.newton_rate_table(spec)
    print(bench.newton_records_to_text(records), end="")
    _write(config, "newton-table", {
        "csv": bench.newton_records_to_csv(records),
        "txt": bench.newton_records_to_text(records),
    })
    return 0


def _run_nu_sweep(config, builder):
    name = config.problem
    if name == "fivepoint":
        sweep_builder = lambda nu: bench.five_point_square(nu=nu, level=config.levels)
    else:
        base = builder(config.levels)

        def sweep_builder(nu):
            return replace(base, nu=nu, _cache={})

    rows = bench.nu_sweep(sweep_builder, config.nus)
    print(bench.nu_rows_to_text(rows), end="")
    _write(config, "nu-sweep", {
        "csv": bench.nu_rows_to_csv(rows),
        "txt": bench.nu_rows_to_text(rows),
    })
    return 0


def run(config):
    """Execute a validated config; returns the process exit code."""
    try:
        validate_config(config)
        if not config.command:
            raise ValidationError("config needs a command=... entry")
        builder, benchmark = _resolve_builder(config)
    except PointctlError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if config.command == "solve":
            return _run_solve(config, builder)
        if config.command == "eoc":
            return _run_eoc(config, builder, benchmark)
        if config.command == "approx-eoc":
            return _run_approx_eoc(config, builder)
        if config.command == "newton-table":
            return _run_newton_table(config, builder)
        if config.command == "nu-sweep":
            return _run_nu_sweep(config, builder)
        raise ValidationError(f"unknown command {config.command!r}")
    except (NoConvergence, MaxIterations, Breakdown) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="pointctl",
        description="Point-tracking elliptic optimal control: solves and studies.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="path to a key=value config file")
    parser.add_argument("--levels", type=int, help="mesh level (count for studies)")
    parser.add_argument("--nu", type=float, help="control cost override")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--format", help="comma-separated subset of csv,txt,vtk")
    args = parser.parse_args(argv)

    try:
        if args.config:
            with open(args.config) as fh:
                config = parse_config(fh.read())
        else:
            config = RunConfig()
        overrides = {"command": args.command}
        if args.levels is not None:
            overrides["levels"] = args.levels
        if args.nu is not None:
            overrides["nu"] = args.nu
        if args.out is not None:
            overrides["output_dir"] = args.out
        if args.format is not None:
            overrides["formats"] = _parse_formats(args.format)
        config = replace(config, **overrides)
        validate_config(config)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValidationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
