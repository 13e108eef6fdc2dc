"""Built-in benchmark problems, convergence studies, and solver-rate tables.

The two exact benchmarks live on the unit disk/ball with a single
observation point at the origin; their closed-form optimal controls are the
(sign-flipped) Green's functions of the Laplacian there, so the control is
singular at the origin yet square integrable.  The constrained benchmark on
the unit square has no closed form and is measured against a much finer
reference solve instead.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .assembly import DofMap, l2_error
from .errors import ValidationError
from .mesh import build_unit_ball, build_unit_disk, build_unit_square, mesh_size, refine_uniform
from .optctl import ProblemSpec, project_box, solve
from .quadrature import ERROR_DEGREE, gauss_rule, physical_points
from .sparse import SparseMatrix  # noqa: F401  (re-exported for callers)

_CHUNK = 32768


@dataclass(frozen=True)
class ExactBenchmark:
    """A problem family with a known optimal triple (u, p, y)."""

    name: str
    dim: int
    spec_builder: Callable[[int], ProblemSpec]
    exact_u: Callable
    exact_p: Callable
    exact_y: Callable


@dataclass
class ConvergenceRecord:
    h: float
    dofs: int
    error: float
    eoc: Optional[float] = None


@dataclass
class NewtonRateRecord:
    k: int
    delta_k: float
    eoc_k: Optional[float] = None


def _radius(x):
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


@lru_cache(maxsize=None)
def _disk_mesh(level):
    return build_unit_disk(level)


@lru_cache(maxsize=None)
def _ball_mesh(level):
    return build_unit_ball(level)


@lru_cache(maxsize=None)
def _square_mesh(level):
    if level == 0:
        return build_unit_square(4)
    return refine_uniform(_square_mesh(level - 1))


def benchmark_2d():
    """Unit-disk problem whose optimal control is log|x| / 2 pi."""

    def exact_u(x):
        return np.log(_radius(x)) / (2.0 * math.pi)

    def exact_p(x):
        return -exact_u(x)

    def exact_y(x):
        return np.cos(0.5 * math.pi * _radius(x))

    def forcing(x):
        r = _radius(x)
        return (math.pi / 4.0) * (
            (2.0 / r) * np.sin(0.5 * math.pi * r) + math.pi * np.cos(0.5 * math.pi * r)
        ) - np.log(r) / (2.0 * math.pi)

    def builder(level):
        mesh = _disk_mesh(level)
        return ProblemSpec(
            mesh=mesh,
            dofmap=DofMap(mesh),
            f=forcing,
            nu=1.0,
            points=[((0.0, 0.0), 0.0)],
        )

    return ExactBenchmark("disk-2d", 2, builder, exact_u, exact_p, exact_y)


def benchmark_3d():
    """Unit-ball problem whose optimal control is -(1/|x| - 1) / 4 pi."""

    def exact_u(x):
        return -(1.0 / _radius(x) - 1.0) / (4.0 * math.pi)

    def exact_p(x):
        return -exact_u(x)

    def exact_y(x):
        return np.cos(0.5 * math.pi * _radius(x))

    def forcing(x):
        r = _radius(x)
        return (math.pi / 4.0) * (
            (4.0 / r) * np.sin(0.5 * math.pi * r) + math.pi * np.cos(0.5 * math.pi * r)
        ) + (1.0 / r - 1.0) / (4.0 * math.pi)

    def builder(level):
        mesh = _ball_mesh(level)
        return ProblemSpec(
            mesh=mesh,
            dofmap=DofMap(mesh),
            f=forcing,
            nu=1.0,
            points=[((0.0, 0.0, 0.0), 0.0)],
        )

    return ExactBenchmark("ball-3d", 3, builder, exact_u, exact_p, exact_y)


def constrained_2d(level=3):
    """Box-constrained three-point problem on the unit square.

    Targets +1 / 0 / -1 at three points on the horizontal midline, control
    cost 1e-2, bounds -10 <= u <= 10; antisymmetric under x -> 1 - x.
    """
    mesh = _square_mesh(level)
    return ProblemSpec(
        mesh=mesh,
        dofmap=DofMap(mesh),
        nu=1e-2,
        lower=-10.0,
        upper=10.0,
        points=[((0.2, 0.5), 1.0), ((0.5, 0.5), 0.0), ((0.8, 0.5), -1.0)],
    )


def five_point_square(nu=1e-4, level=5):
    """Unconstrained five-point problem driving the state to 1 at all points."""
    mesh = _square_mesh(level)
    pts = [(0.2, 0.5), (0.5, 0.5), (0.8, 0.2), (0.8, 0.5), (0.8, 0.8)]
    return ProblemSpec(
        mesh=mesh,
        dofmap=DofMap(mesh),
        nu=nu,
        points=[(p, 1.0) for p in pts],
    )


def _fill_eoc(records):
    for prev, cur in zip(records, records[1:]):
        if prev.error > 0 and cur.error > 0:
            cur.eoc = math.log2(prev.error / cur.error)
    return records


def eoc_study(benchmark, levels):
    """Solve on ``levels`` nested meshes and tabulate control L2 errors."""
    if levels < 2:
        raise ValidationError("an EOC study needs at least 2 levels")
    records = []
    for level in range(levels):
        spec = benchmark.spec_builder(level)
        sol = solve(spec)
        rule = gauss_rule(spec.mesh.dim, ERROR_DEGREE)
        err = l2_error(sol.control, benchmark.exact_u, spec.mesh, rule)
        records.append(
            ConvergenceRecord(mesh_size(spec.mesh), spec.mesh.num_vertices, err)
        )
    return _fill_eoc(records)


def _ancestors(fine_mesh, generations):
    """Map fine cells to their ancestor cells ``generations`` levels up."""
    anc = np.arange(fine_mesh.num_cells)
    m = fine_mesh
    for _ in range(generations):
        if m.cell_parent is None:
            raise ValidationError("fine mesh is not a refinement of the coarse mesh")
        anc = m.cell_parent[anc]
        m = m.parent
    return m, anc


def _control_diff_on_fine(fine_control, coarse_control, fine_mesh, generations, rule):
    """L2 norm of (fine control - coarse control) integrated on the fine mesh."""
    coarse_mesh, anc = _ancestors(fine_mesh, generations)
    coarse_nodal = coarse_control.p.padded()
    dets = fine_mesh.jacobian_dets
    acc = 0.0
    for start in range(0, fine_mesh.num_cells, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, fine_mesh.num_cells))
        phys = physical_points(fine_mesh, rule, idx)
        vals_fine = fine_control.values_on_cells(idx, rule.points, phys)
        flat = phys.reshape(-1, fine_mesh.dim)
        cells = anc[idx].repeat(rule.num_points)
        v0 = coarse_mesh.vertices[coarse_mesh.cells[cells, 0]]
        lam = np.einsum(
            "cij,cj->ci", coarse_mesh.inverse_jacobians[cells], flat - v0
        )
        bary = np.concatenate([(1.0 - lam.sum(axis=1))[:, None], lam], axis=1)
        pv = np.einsum("ck,ck->c", coarse_nodal[coarse_mesh.cells[cells]], bary)
        vals_coarse = project_box(
            -pv / coarse_control.nu, coarse_control.lower, coarse_control.upper
        ).reshape(idx.size, rule.num_points)
        diff = vals_fine - vals_coarse
        acc += float(np.dot(dets[idx], (diff * diff) @ rule.weights))
    return float(np.sqrt(acc))


def approx_eoc_study(spec_builder, levels, fine_level=None):
    """Convergence table against a reference solve on a much finer mesh.

    ``fine_level`` defaults to two refinements past the finest study level;
    it may not be coarser than the finest study level.  All errors are
    integrated on the fine mesh, whose cells are descendants of every coarse
    mesh's cells.
    """
    if levels < 2:
        raise ValidationError("an EOC study needs at least 2 levels")
    if fine_level is None:
        fine_level = levels + 1
    if fine_level < levels - 1:
        raise ValidationError("fine_level may not be coarser than the finest study level")
    fine_spec = spec_builder(fine_level)
    fine_sol = solve(fine_spec)
    rule = gauss_rule(fine_spec.mesh.dim, ERROR_DEGREE)
    records = []
    for level in range(levels):
        spec = spec_builder(level)
        sol = solve(spec)
        err = _control_diff_on_fine(
            fine_sol.control, sol.control, fine_spec.mesh, fine_level - level, rule
        )
        records.append(
            ConvergenceRecord(mesh_size(spec.mesh), spec.mesh.num_vertices, err)
        )
    return _fill_eoc(records)


def newton_rate_table(spec):
    """Per-iteration residual norms and their convergence-rate exponents."""
    sol = solve(spec)
    deltas = sol.report.residual_norms
    records = [NewtonRateRecord(k, d) for k, d in enumerate(deltas)]
    for k in range(1, len(deltas) - 1):
        down_prev = math.log(deltas[k] / deltas[k - 1])
        down_next = math.log(deltas[k + 1] / deltas[k])
        if down_prev != 0.0:
            records[k].eoc_k = down_next / down_prev
    return records


def nu_sweep(spec_builder, nus):
    """Solve for a decreasing sequence of control costs on a fixed mesh.

    Returns (nu, max point mismatch, control L2 norm) per value.
    """
    nus = [float(v) for v in nus]
    if any(v <= 0 for v in nus):
        raise ValidationError("all nu values must be positive")
    if any(b >= a for a, b in zip(nus, nus[1:])):
        raise ValidationError("nu values must be strictly decreasing")
    rows = []
    for nu in nus:
        spec = spec_builder(nu)
        sol = solve(spec)
        mismatch = max(
            abs(float(vec @ sol.y.coefficients) - g)
            for _, g, vec in spec.point_vectors()
        )
        rule = gauss_rule(spec.mesh.dim, ERROR_DEGREE)
        unorm = l2_error(
            sol.control, lambda x: np.zeros(x.shape[0]), spec.mesh, rule
        )
        rows.append((nu, mismatch, unorm))
    return rows


# --- table rendering -----------------------------------------------------


def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{value:.12g}"


def _text_table(headers, rows):
    cells = [headers] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = [
        "  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in cells
    ]
    return "\n".join(lines) + "\n"


def _csv_table(headers, rows):
    lines = [",".join(headers)]
    for row in rows:
        lines.append(",".join("" if v is None else _fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def convergence_rows(records):
    return [(r.h, r.dofs, r.error, r.eoc) for r in records]


def records_to_csv(records):
    return _csv_table(["h", "dofs", "error", "eoc"], convergence_rows(records))


def records_to_text(records):
    return _text_table(["h", "DoFs", "L2 error", "EOC"], convergence_rows(records))


def newton_records_to_csv(records):
    return _csv_table(["k", "delta", "eoc"], [(r.k, r.delta_k, r.eoc_k) for r in records])


def newton_records_to_text(records):
    return _text_table(
        ["k", "residual", "EOC"], [(r.k, r.delta_k, r.eoc_k) for r in records]
    )


def nu_rows_to_csv(rows):
    return _csv_table(["nu", "max_mismatch", "control_l2"], rows)


def nu_rows_to_text(rows):
    return _text_table(["nu", "max mismatch", "control L2"], rows)
