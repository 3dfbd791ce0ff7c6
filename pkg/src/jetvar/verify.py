"""Property suite run by ``jetvar verify``.

Each property returns ``(status, detail)`` with status PASS, FAIL or SKIP.
All random draws use fixed seeds so reports are byte-identical across runs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exprlang import (
    IDENTITY_SEED, Indep, Jet, JetJ1, Mom, MomD, diff, equal_numeric, evaluate,
    is_zero, normalize, variables,
)
from .jetcalc import prolong, total_derivative
from .mech import MechState, phase_vector_field, rk4_integrate, state_variables
from .multiindex import decompositions, enumerate_upto, of_order
from .problem import Problem
from .triple import (
    check_phase_section, generating_family, legendre_relation_contains,
    phase_system_reduced, phase_system_unreduced,
    reduce_hamiltonian,
)
from .varcalc import (
    Lagrangian, euler_lagrange, functional_derivative_oracle, momenta_reconstruct,
    raise_order,
)

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"
RESIDUAL_TOL = 1e-9
FD_TOL = 1e-6
ORACLE_TOL = 0.05


@dataclass(frozen=True)
class Outcome:
    problem: str
    prop: str
    status: str
    detail: str

    def line(self) -> str:
        return f"{self.problem}\t{self.prop}\t{self.status}\t{self.detail}"


def _rng(salt: int = 0) -> np.random.Generator:
    return np.random.default_rng(IDENTITY_SEED + salt)


def _random_point(vars_, rng) -> dict:
    ordered = sorted(vars_, key=lambda v: v.sort_key())
    return {v: float(x) for v, x in zip(ordered, rng.uniform(-2, 2, len(ordered)))}


def _fmt(x: float) -> str:
    return f"{x:.3g}"


def _grid(pb: Problem, n: int = 5) -> list:
    axes = [np.linspace(0.0, 1.0, n) for _ in range(pb.ctx.m)]
    return [g.ravel() for g in np.meshgrid(*axes, indexing="ij")]


# --------------------------------------------------------------------------


def prop_diff_finite_difference(pb: Problem):
    L = pb.lagrangian.density
    vs = sorted(variables(L), key=lambda v: v.sort_key())
    if not vs:
        return PASS, "constant Lagrangian"
    rng = _rng(1)
    h = 1e-5
    worst = 0.0
    for _ in range(10):
        point = _random_point(vs, rng)
        for v in vs:
            exact = float(evaluate(diff(L, v), point))
            up, down = dict(point), dict(point)
            up[v] += h
            down[v] -= h
            fd = (float(evaluate(L, up)) - float(evaluate(L, down))) / (2 * h)
            worst = max(worst, abs(exact - fd) / (1 + abs(exact)))
    return (PASS if worst <= FD_TOL else FAIL), f"max rel err {_fmt(worst)}"


def prop_total_derivative_commute(pb: Problem):
    ctx = pb.ctx
    if ctx.m < 2:
        return SKIP, "one independent variable"
    L = pb.lagrangian.density
    for i in range(ctx.m):
        for j in range(i + 1, ctx.m):
            a = total_derivative(total_derivative(L, i, ctx), j, ctx)
            b = total_derivative(total_derivative(L, j, ctx), i, ctx)
            if normalize(a - b) != normalize(0):
                return FAIL, f"D_{i}D_{j} L != D_{j}D_{i} L"
    return PASS, "exact after normalize"


def prop_prolong_chain(pb: Problem):
    if pb.section is None:
        return SKIP, "no section"
    ctx = pb.ctx
    L = pb.lagrangian.density
    r = ctx.lag_order
    h = 1e-5
    worst = 0.0
    pts = _rng(2).uniform(0.1, 0.9, (5, ctx.m))
    for x in pts:
        for i in range(ctx.m):
            dl = float(evaluate(total_derivative(L, i, ctx), prolong(pb.section, r + 1, list(x))))
            up, down = x.copy(), x.copy()
            up[i] += h
            down[i] -= h
            fd = (float(evaluate(L, prolong(pb.section, r, list(up))))
                  - float(evaluate(L, prolong(pb.section, r, list(down))))) / (2 * h)
            worst = max(worst, abs(dl - fd) / (1 + abs(dl)))
    return (PASS if worst <= FD_TOL else FAIL), f"max rel err {_fmt(worst)}"


def prop_el_divergence_null(pb: Problem):
    ctx = pb.ctx
    for i in range(ctx.m):
        div = Lagrangian(ctx.raised(), total_derivative(pb.lagrangian.density, i, ctx))
        if not all(is_zero(e) for e in euler_lagrange(div)):
            return FAIL, f"EL(D_{ctx.independents[i]} L) is not zero"
    return PASS, "EL of every D_i L vanishes"


def prop_momenta_reconstruction(pb: Problem):
    L = pb.lagrangian
    table = momenta_reconstruct(L)
    el = euler_lagrange(L)
    for a, (b, e) in enumerate(zip(table.bottom_residual(), el)):
        if normalize(b - e) != normalize(0):
            return FAIL, f"bottom residual differs from EL in field {pb.ctx.fields[a]}"
    if pb.section is None or pb.phase_section is None:
        return PASS, "bottom residual equals EL"
    # declared momenta must solve the top and higher divergence equations and
    # leave the Euler-Lagrange value as the bottom residual
    system = phase_system_reduced(L)
    grid = _grid(pb)
    report = check_phase_section(system, pb.section, pb.phase_section, np.column_stack(grid))
    values = prolong(pb.section, 2 * pb.ctx.lag_order, grid)
    worst = 0.0
    for eq, r in report.rows:
        if eq.family == "H":
            continue
        target = 0.0
        if eq.family == "DIV" and eq.index.order == 0:
            target = evaluate(el[eq.field], values)
        worst = max(worst, float(np.max(np.abs(r - target))))
    if worst > RESIDUAL_TOL:
        return FAIL, f"declared momenta violate the reconstruction equations (max {_fmt(worst)})"
    return PASS, f"bottom residual equals EL; declared momenta consistent (max {_fmt(worst)})"


def random_holonomic_assignment(ctx, rng) -> dict:
    point = {Indep(i): float(x) for i, x in enumerate(rng.uniform(-2, 2, ctx.m))}
    for a in range(ctx.n):
        for I in enumerate_upto(ctx.m, ctx.lag_order):
            point[Jet(a, I)] = float(rng.uniform(-2, 2))
        for I in enumerate_upto(ctx.m, ctx.k):
            for i in range(ctx.m):
                point[JetJ1(a, I, i)] = point[Jet(a, I.bump(i))]
                point[Mom(a, I, i)] = float(rng.uniform(-2, 2))
                for j in range(ctx.m):
                    point[MomD(a, I, i, j)] = float(rng.uniform(-2, 2))
    return point


def reduced_unreduced_gap(L: Lagrangian, samples: int = 50, salt: int = 3) -> float:
    red = {(e.family, e.field, e.index): e for e in phase_system_reduced(L).equations if e.family != "H"}
    unr = {(e.family, e.field, e.index): e for e in phase_system_unreduced(L).equations if e.family != "H"}
    if red.keys() != unr.keys():
        return float("inf")
    rng = _rng(salt)
    worst = 0.0
    for _ in range(samples):
        point = random_holonomic_assignment(L.ctx, rng)
        for key, eq in red.items():
            diff_ = float(evaluate(eq.residual, point)) - float(evaluate(unr[key].residual, point))
            worst = max(worst, abs(diff_))
    return worst


def prop_reduced_unreduced(pb: Problem):
    gap = reduced_unreduced_gap(pb.lagrangian)
    return (PASS if gap <= 1e-12 else FAIL), f"max gap {_fmt(gap)} over 50 holonomic points"


def prop_order_raising(pb: Problem):
    L = pb.lagrangian
    raised = euler_lagrange(raise_order(L))
    worst = 0.0
    for e1, e2 in zip(raised, euler_lagrange(L)):
        rep = equal_numeric(e1, e2, trials=20, tol=1e-9)
        worst = max(worst, rep.max_error)
        if not rep:
            return FAIL, f"EL changes under raising (err {_fmt(rep.max_error)})"
    return PASS, f"max err {_fmt(worst)} over 20 samples"


def prop_legendre_criticality(pb: Problem):
    fam = generating_family(pb.lagrangian)
    tops = {(e.field, e.index): e for e in phase_system_reduced(pb.lagrangian).family("TOP")}
    for y, crit in fam.criticality.items():
        if not is_zero(crit + tops[(y.field, y.index)].residual):
            return FAIL, f"criticality differs from the top equation at {y}"
    return PASS, f"criticality matches the top equations ({len(tops)})"


def prop_hamiltonian_flow(pb: Problem):
    ctx = pb.ctx
    if ctx.m != 1:
        return SKIP, "field theory"
    res = reduce_hamiltonian(pb.lagrangian)
    if not res.regular:
        return SKIP, f"{res.status} top Hessian"
    field = phase_vector_field(pb.lagrangian)
    H = res.hamiltonian
    svars = state_variables(ctx)
    half = len(svars) // 2
    for idx, v in enumerate(svars):
        if idx < half:
            expected = diff(H, svars[half + idx])
        else:
            expected = -diff(H, svars[idx - half])
        if not is_zero(expected - field.exprs[idx]):
            return FAIL, f"Hamilton equation mismatch for state component {idx}"
    # energy along a short run
    traj = rk4_integrate(field, MechState.from_vector(_rng(4).uniform(-1, 1, len(svars)), ctx.n, ctx.k + 1),
                         1e-3, 1.0)
    drift = float(np.max(np.abs(traj.energy - traj.energy[0]))) if traj.energy is not None else 0.0
    if drift > 1e-8:
        return FAIL, f"energy drift {_fmt(drift)}"
    return PASS, f"Hamilton equations match; drift {_fmt(drift)} over T=1"


def prop_symmetrization_fiber(pb: Problem):
    ctx = pb.ctx
    L = pb.lagrangian
    rng = _rng(5)
    table = momenta_reconstruct(L)
    for _ in range(20):
        jet = {Indep(i): float(x) for i, x in enumerate(rng.uniform(-2, 2, ctx.m))}
        for a in range(ctx.n):
            for I in enumerate_upto(ctx.m, 2 * ctx.lag_order):
                jet[Jet(a, I)] = float(rng.uniform(-2, 2))
        p = {v: float(evaluate(e, jet)) for v, e in table.items()}
        if not legendre_relation_contains(L, jet, p):
            return FAIL, "reconstructed momenta not Legendre-related"
        # shift lower momenta arbitrarily and top momenta along the fiber
        shifted = dict(p)
        for v in shifted:
            if v.index.order < ctx.k:
                shifted[v] += float(rng.uniform(-1, 1))
        for a in range(ctx.n):
            for J in of_order(ctx.m, ctx.lag_order):
                decs = decompositions(J)
                if len(decs) > 1:
                    d = float(rng.uniform(-1, 1))
                    shifted[Mom(a, *decs[0])] += d
                    shifted[Mom(a, *decs[1])] -= d
        if not legendre_relation_contains(L, jet, shifted):
            return FAIL, "relation not invariant along the symmetrization fiber"
        broken = dict(p)
        top = of_order(ctx.m, ctx.lag_order)[0]
        J, i = decompositions(top)[0]
        broken[Mom(0, J, i)] += 1.0
        if legendre_relation_contains(L, jet, broken):
            return FAIL, "relation accepts shifted symmetrized momenta"
    return PASS, "20 random fibers"


def prop_el_oracle(pb: Problem):
    if pb.section is None:
        return SKIP, "no section"
    ctx = pb.ctx
    x0 = [0.5] * ctx.m
    values = prolong(pb.section, 2 * ctx.lag_order, x0)
    exact = np.array([float(evaluate(e, values)) for e in euler_lagrange(pb.lagrangian)])
    approx = functional_derivative_oracle(pb.lagrangian, pb.section, x0, 0.2)
    err = float(np.max(np.abs(approx - exact) / (1 + np.abs(exact))))
    return (PASS if err <= ORACLE_TOL else FAIL), f"rel err {_fmt(err)} at width 0.2"


PROPERTIES: list[tuple[str, Callable]] = [
    ("diff-finite-difference", prop_diff_finite_difference),
    ("total-derivative-commute", prop_total_derivative_commute),
    ("prolong-chain", prop_prolong_chain),
    ("el-divergence-null", prop_el_divergence_null),
    ("momenta-reconstruction", prop_momenta_reconstruction),
    ("reduced-unreduced", prop_reduced_unreduced),
    ("order-raising", prop_order_raising),
    ("legendre-criticality", prop_legendre_criticality),
    ("hamiltonian-flow", prop_hamiltonian_flow),
    ("symmetrization-fiber", prop_symmetrization_fiber),
    ("el-oracle", prop_el_oracle),
]


def verify_problem(pb: Problem) -> list[Outcome]:
    out = []
    for name, fn in PROPERTIES:
        try:
            status, detail = fn(pb)
        except Exception as exc:  # a crash is a failed property, not a crashed suite
            status, detail = FAIL, f"{type(exc).__name__}: {exc}"
        out.append(Outcome(pb.name, name, status, detail))
    return out
