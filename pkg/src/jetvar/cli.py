"""Command-line interface: ``jetvar derive|check|simulate|verify``.

Exit codes: 0 success, 1 a check or verification failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from .exprlang import EvaluationError, ParseError, print_canonical, var_name
from .mech import (
    IntegrationError, MechState, mech_namer, phase_vector_field, render_phase_system,
    rk4_integrate,
)
from .problem import BUILTIN_PROBLEMS, ProblemError, load_problem, load_sections
from .triple import (
    RELATION_TOL, check_phase_section, format_report, legendre_top,
    phase_section_from_momenta, phase_system_reduced, phase_system_unreduced,
    reduce_hamiltonian, _top_lhs,
)
from .varcalc import euler_lagrange
from .verify import FAIL, verify_problem

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _namer(ctx, mech: bool):
    if not mech:
        return lambda v: var_name(v, ctx)
    try:
        return mech_namer(ctx)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_derive_el(pb, out) -> int:
    ctx = pb.ctx
    out.write(f"# {pb.name}: Euler-Lagrange expressions, jet order <= {2 * ctx.lag_order}\n")
    for fieldname, e in zip(ctx.fields, euler_lagrange(pb.lagrangian)):
        out.write(f"{fieldname}: {print_canonical(e, ctx)}\n")
    return EXIT_OK


def cmd_derive_phase(pb, out, unreduced: bool = False, mech: bool = False) -> int:
    system = phase_system_unreduced(pb.lagrangian) if unreduced else phase_system_reduced(pb.lagrangian)
    if mech:
        _namer(pb.ctx, True)
        out.write(render_phase_system(system))
    else:
        out.write(format_report(system))
    return EXIT_OK


def cmd_legendre(pb, out, mech: bool = False) -> int:
    namer = _namer(pb.ctx, mech)
    for (a, J), e in legendre_top(pb.lagrangian).items():
        q = print_canonical(_top_lhs(a, J), namer=namer)
        out.write(f"{q} = {print_canonical(e, namer=namer)}\n")
    return EXIT_OK


def cmd_hamiltonian(pb, out, mech: bool = False) -> int:
    namer = _namer(pb.ctx, mech)
    res = reduce_hamiltonian(pb.lagrangian)
    if res.regular:
        out.write(f"H = {print_canonical(res.hamiltonian, namer=namer)}\n")
        return EXIT_OK
    reason = "singular Lagrangian" if res.status == "singular" else "non-constant top-jet Hessian"
    out.write(f"# {reason}: generating family retained\n")
    fam = res.family
    out.write(f"F = {print_canonical(fam.full, namer=namer)}\n")
    for y, crit in fam.criticality.items():
        out.write(f"dF/d({namer(y)}) = {print_canonical(crit, namer=namer)} = 0\n")
    return EXIT_OK


def parse_grid(spec: str, m: int) -> np.ndarray:
    """``a:b:n[,a:b:n...]`` -> tensor-product points, one axis spec per independent."""
    parts = [p for p in spec.split(",") if p.strip()]
    if len(parts) == 1 and m > 1:
        parts = parts * m
    if len(parts) != m:
        raise InputError(f"grid needs {m} axis specs, got {len(parts)}")
    axes = []
    for part in parts:
        bits = part.split(":")
        if len(bits) != 3:
            raise InputError(f"bad grid axis {part!r}; expected a:b:n")
        try:
            a, b, n = float(bits[0]), float(bits[1]), int(bits[2])
        except ValueError:
            raise InputError(f"bad grid axis {part!r}") from None
        if n < 1:
            raise InputError("grid axes need at least one point")
        axes.append(np.linspace(a, b, n))
    return np.column_stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])


def cmd_check(pb, sections_arg: str, grid_spec: str, out, tol: float = RELATION_TOL,
              unreduced: bool = False) -> int:
    section, phase = load_sections(sections_arg, pb)
    origin = "declared"
    if phase is None:
        phase = phase_section_from_momenta(pb.lagrangian, section)
        origin = "reconstructed"
    grid = parse_grid(grid_spec, pb.ctx.m)
    system = phase_system_unreduced(pb.lagrangian) if unreduced else phase_system_reduced(pb.lagrangian)
    report = check_phase_section(system, section, phase, grid)
    ctx = pb.ctx
    out.write(f"# {pb.name}: {len(grid)} grid points, {origin} momenta, tol {tol:g}\n")
    for fam, value in report.family_max.items():
        out.write(f"{fam}\t{value + 0.0:.6g}\n")
    for eq, values in report.rows:
        if np.max(np.abs(values)) <= tol:
            continue
        out.write(f"{eq.family} | {ctx.fields[eq.field]} | {eq.index!r} | {eq.text(ctx)}\n")
        for point, value in zip(grid, values):
            coords = " ".join(f"{n}={x:.6g}" for n, x in zip(ctx.independents, point))
            out.write(f"  {coords}\tresidual {value + 0.0:.12g}\n")
    ok = report.ok(tol)
    out.write("PASS\n" if ok else "FAIL\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(pb, init: str, dt: float, t_end: float, out) -> int:
    if pb.ctx.m != 1:
        raise InputError("simulate needs a mechanics problem (one independent variable)")
    field = phase_vector_field(pb.lagrangian)
    if field is None:
        raise InputError("singular Lagrangian: no explicit phase vector field")
    try:
        values = [float(v) for v in init.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"bad --init {init!r}") from None
    try:
        state = MechState.from_per_field(values, pb.ctx)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    traj = rk4_integrate(field, state, dt, t_end)
    out.write(traj.to_csv())
    return EXIT_OK


def cmd_verify(problems, out) -> int:
    status = EXIT_OK
    out.write("problem\tproperty\tstatus\tdetail\n")
    for pb in problems:
        for outcome in verify_problem(pb):
            out.write(outcome.line() + "\n")
            if outcome.status == FAIL:
                status = EXIT_FAIL
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jetvar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("derive", help="print derived equations")
    d.add_argument("what", choices=["el", "phase", "legendre", "hamiltonian"])
    d.add_argument("problem", help="problem file or builtin name")
    d.add_argument("--unreduced", action="store_true", help="phase equations on J^1 J^k")
    d.add_argument("--mech", action="store_true", help="mechanics names (q, v, p, r)")

    c = sub.add_parser("check", help="residuals of a section in the phase equations")
    c.add_argument("problem")
    c.add_argument("sections", help="section file or builtin name")
    c.add_argument("--grid", required=True, help="a:b:n per independent, comma separated")
    c.add_argument("--tol", type=float, default=RELATION_TOL)
    c.add_argument("--unreduced", action="store_true")

    s = sub.add_parser("simulate", help="integrate a regular mechanics problem (CSV)")
    s.add_argument("problem")
    s.add_argument("--init", required=True, help="u^(0..k),p^(0..k) per field, or once for all")
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--t-end", type=float, required=True)

    v = sub.add_parser("verify", help="run the property suite")
    v.add_argument("problem", nargs="?")
    v.add_argument("--all-builtin", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            if args.all_builtin == (args.problem is not None):
                raise InputError("give a problem or --all-builtin (not both)")
            names = BUILTIN_PROBLEMS if args.all_builtin else [args.problem]
            return cmd_verify([load_problem(n) for n in names], out)
        pb = load_problem(args.problem)
        if args.command == "derive":
            if args.what == "el":
                return cmd_derive_el(pb, out)
            if args.what == "phase":
                return cmd_derive_phase(pb, out, args.unreduced, args.mech)
            if args.what == "legendre":
                return cmd_legendre(pb, out, args.mech)
            return cmd_hamiltonian(pb, out, args.mech)
        if args.command == "check":
            return cmd_check(pb, args.sections, args.grid, out, args.tol, args.unreduced)
        return cmd_simulate(pb, args.init, args.dt, args.t_end, out)
    except (InputError, ProblemError, ParseError, EvaluationError, IntegrationError, ValueError) as exc:
        sys.stderr.write(f"jetvar: error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
