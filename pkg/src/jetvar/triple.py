"""Phase equations, Legendre data and generating objects of higher-order triples.

Equations are stored as ``lhs = rhs`` with residual ``rhs - lhs``.  The
families are

* ``H``: holonomy, ``u_{I;i} = u_{I+i}`` (plus top-level symmetry in the
  unreduced system, where the top jets are first-jet coordinates);
* ``DIV``: ``sum_j p^{I,j}_{;j} + sum_{J+i=I} p^{J,i} = dL/du_I`` for |I| <= k;
* ``TOP``: ``sum_{J+i=I} p^{J,i} = dL/du_I`` for |I| = k+1.

The residual of the |I| = 0 divergence equation along reconstructed momenta is
the Euler-Lagrange expression.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .context import JetContext
from .exprlang import (
    Const, Expr, Indep, Jet, JetJ1, Mom, MomD, Var, add, constant_value,
    diff, evaluate, normalize, print_canonical, substitute,
)
from .jetcalc import PhaseSectionSpec, SectionSpec, holonomy_pairs, prolong
from .multiindex import MultiIndex, decompositions, enumerate_upto, of_order
from .varcalc import Lagrangian, momenta_reconstruct, partials

FAMILIES = ("H", "DIV", "TOP")
RELATION_TOL = 1e-9


@dataclass(frozen=True)
class Equation:
    family: str
    field: int
    index: MultiIndex
    lhs: Expr
    rhs: Expr
    axis: int | None = None
    residual: Expr = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "index", MultiIndex(self.index))
        object.__setattr__(self, "lhs", normalize(self.lhs))
        object.__setattr__(self, "rhs", normalize(self.rhs))
        object.__setattr__(self, "residual", normalize(self.rhs - self.lhs))

    def text(self, ctx: JetContext | None = None, namer: Callable | None = None) -> str:
        return f"{print_canonical(self.lhs, ctx, namer)} = {print_canonical(self.rhs, ctx, namer)}"


@dataclass(frozen=True)
class PhaseSystem:
    ctx: JetContext
    lagrangian: Lagrangian
    reduced: bool
    equations: tuple

    def family(self, name: str) -> list[Equation]:
        return [e for e in self.equations if e.family == name]

    def report(self) -> str:
        return format_report(self)


def _sum_vars(vars_: Iterable) -> Expr:
    return add(Var(v) for v in vars_)


def _div_lhs(a: int, I: MultiIndex, m: int) -> Expr:
    terms = [MomD(a, I, j, j) for j in range(m)]
    terms += [Mom(a, J, i) for J, i in decompositions(I)]
    return _sum_vars(terms)


def _top_lhs(a: int, I: MultiIndex) -> Expr:
    return _sum_vars(Mom(a, J, i) for J, i in decompositions(I))


def _sorted(eqs: list[Equation]) -> tuple:
    def key(e):
        return (FAMILIES.index(e.family), e.field, e.index.sort_key(),
                -1 if e.axis is None else e.axis)

    return tuple(sorted(eqs, key=key))


def _momentum_equations(L: Lagrangian, rhs_map: Callable[[Expr], Expr]) -> list[Equation]:
    ctx = L.ctx
    P = partials(L)
    eqs = []
    for a in range(ctx.n):
        for I in enumerate_upto(ctx.m, ctx.k):
            eqs.append(Equation("DIV", a, I, _div_lhs(a, I, ctx.m), rhs_map(P[(a, I)])))
        for I in of_order(ctx.m, ctx.lag_order):
            eqs.append(Equation("TOP", a, I, _top_lhs(a, I), rhs_map(P[(a, I)])))
    return eqs


def phase_system_reduced(L: Lagrangian) -> PhaseSystem:
    """Phase equations with the top jets u_{I+i} (|I| = k) as coordinates."""
    ctx = L.ctx
    eqs = [
        Equation("H", a, I, Var(JetJ1(a, I, i)), Var(Jet(a, I.bump(i))), axis=i)
        for a in range(ctx.n) for I in enumerate_upto(ctx.m, ctx.k) for i in range(ctx.m)
    ]
    eqs += _momentum_equations(L, lambda e: e)
    return PhaseSystem(ctx, L, True, _sorted(eqs))


def top_jet_to_first_jet(ctx: JetContext) -> dict:
    """Replace each top jet u_K by the first-jet coordinate u_{J;j}, (J, j) the first decomposition of K."""
    out = {}
    for a in range(ctx.n):
        for K in of_order(ctx.m, ctx.lag_order):
            J, j = decompositions(K)[0]
            out[Jet(a, K)] = Var(JetJ1(a, J, j))
    return out


def phase_system_unreduced(L: Lagrangian) -> PhaseSystem:
    """Phase equations on J^1 J^k: holonomy and symmetry stated explicitly."""
    ctx = L.ctx
    eqs = []
    for kind, lhs, rhs in holonomy_pairs(ctx):
        eqs.append(Equation("H", lhs.field, lhs.index, Var(lhs), Var(rhs), axis=lhs.axis))
    to_j1 = top_jet_to_first_jet(ctx)
    eqs += _momentum_equations(L, lambda e: substitute(e, to_j1))
    return PhaseSystem(ctx, L, False, _sorted(eqs))


def format_report(sys: PhaseSystem) -> str:
    """One line per equation: ``family | field | multiindex | lhs = rhs``."""
    ctx = sys.ctx
    lines = [
        f"{e.family} | {ctx.fields[e.field]} | {e.index!r} | {e.text(ctx)}"
        for e in sys.equations
    ]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# residual checks on sections


def phase_section_from_momenta(L: Lagrangian, s: SectionSpec) -> PhaseSectionSpec:
    """Reconstructed momenta evaluated along the section ``s``."""
    ctx = L.ctx
    table = momenta_reconstruct(L)
    jets = s.jet_substitution(2 * ctx.k + 1)
    return PhaseSectionSpec(ctx, {v: substitute(e, jets) for v, e in table.items()})


def section_assignment(ctx: JetContext, s: SectionSpec, ps: PhaseSectionSpec | None, x: Sequence) -> dict:
    """Values of every phase-system variable along the first jet of (s, ps) at ``x``."""
    values = prolong(s, ctx.lag_order, x)
    for a in range(ctx.n):
        for I in enumerate_upto(ctx.m, ctx.k):
            for i in range(ctx.m):
                values[JetJ1(a, I, i)] = values[Jet(a, I.bump(i))]
    if ps is not None:
        point = {Indep(i): xi for i, xi in enumerate(x)}
        shape = np.broadcast(*[np.asarray(xi) for xi in x]).shape
        for v, e in ps.substitution().items():
            val = evaluate(e, point)
            values[v] = np.broadcast_to(np.asarray(val, dtype=float), shape) if shape else val
    return values


@dataclass
class PhaseCheckReport:
    family_max: dict
    rows: list            # (equation, residual values over the grid)
    grid: np.ndarray

    @property
    def max_residual(self) -> float:
        return max(self.family_max.values(), default=0.0)

    def ok(self, tol: float = RELATION_TOL) -> bool:
        return self.max_residual <= tol


def _grid_axes(grid, m: int) -> list[np.ndarray]:
    pts = np.asarray(grid, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if m == 1 else pts[None, :]
    if pts.size == 0 or pts.shape[1] != m:
        raise ValueError(f"grid must be a non-empty list of {m}-dimensional points")
    return [pts[:, i] for i in range(m)], pts


def check_phase_section(sys: PhaseSystem, s: SectionSpec, ps: PhaseSectionSpec, grid) -> PhaseCheckReport:
    """Substitute the first jet of (s, ps) into every residual on ``grid``."""
    ctx = sys.ctx
    axes, pts = _grid_axes(grid, ctx.m)
    values = section_assignment(ctx, s, ps, axes)
    rows = []
    fam_max = {f: 0.0 for f in FAMILIES}
    for eq in sys.equations:
        r = np.broadcast_to(np.asarray(evaluate(eq.residual, values), dtype=float), (len(pts),))
        rows.append((eq, r))
        fam_max[eq.family] = max(fam_max[eq.family], float(np.max(np.abs(r))))
    return PhaseCheckReport(fam_max, rows, pts)


# --------------------------------------------------------------------------
# Legendre data


def legendre_top(L: Lagrangian) -> dict:
    """The map l_k: top symmetrized momenta q_a^J = dL/du^a_J, |J| = k+1."""
    ctx = L.ctx
    P = partials(L)
    return {(a, J): P[(a, J)] for a in range(ctx.n) for J in of_order(ctx.m, ctx.lag_order)}


def legendre_relation_contains(L: Lagrangian, jet: Mapping, p: Mapping, tol: float = RELATION_TOL) -> bool:
    """Whether momenta ``p`` are Legendre-related to the (k+1)-jet ``jet``.

    Only the symmetrized top momenta are constrained.
    """
    ctx = L.ctx
    q = symmetrize_momenta(p, ctx)
    for (a, J), expr in legendre_top(L).items():
        if abs(q.q[(a, J)] - float(evaluate(expr, jet))) > tol:
            return False
    return True


@dataclass
class QkElement:
    ctx: JetContext
    q: dict                       # (field, J) with |J| = k+1 -> value
    x: tuple = ()
    u: dict = field(default_factory=dict)


def symmetrize_momenta(p: Mapping, ctx: JetContext) -> QkElement:
    """q_a^J = sum over J = I + i of p_a^{I,i}, for |J| = k+1."""
    q = {}
    for a in range(ctx.n):
        for J in of_order(ctx.m, ctx.lag_order):
            total = 0
            for I, i in decompositions(J):
                total = total + p[Mom(a, I, i)]
            q[(a, J)] = total
    return QkElement(ctx, q)


# --------------------------------------------------------------------------
# Lagrangian / Hamiltonian sides


@dataclass
class LagElement:
    """Covector on J^{k+1}: jets u_I (|I| <= k+1) and components a^I."""

    ctx: JetContext
    x: tuple
    u: dict
    a: dict

    def __post_init__(self):
        _require(self.u, _pairs(self.ctx, self.ctx.lag_order), "jet")
        _require(self.a, _pairs(self.ctx, self.ctx.lag_order), "covector")


@dataclass
class HamElement:
    """Coordinates (x, u_I, f_J, xi^I, zeta_J), |I| <= k, |J| = k+1."""

    ctx: JetContext
    x: tuple
    u: dict
    f: dict
    xi: dict
    zeta: dict

    def __post_init__(self):
        low = _pairs(self.ctx, self.ctx.k)
        top = _top_pairs(self.ctx)
        _require(self.u, low, "jet")
        _require(self.xi, low, "xi")
        _require(self.f, top, "f")
        _require(self.zeta, top, "zeta")


def _pairs(ctx, order):
    return [(a, I) for a in range(ctx.n) for I in enumerate_upto(ctx.m, order)]


def _top_pairs(ctx):
    return [(a, J) for a in range(ctx.n) for J in of_order(ctx.m, ctx.lag_order)]


def _require(d: Mapping, keys, what: str) -> None:
    missing = [k for k in keys if k not in d]
    if missing:
        raise ValueError(f"{what} coordinates missing for {missing[:3]}")


def R_k_map(le: LagElement) -> HamElement:
    """(u_I, u_J, a^I, a^J) -> (u_I, f_J = a^J, xi^I = a^I, zeta_J = -u_J)."""
    ctx = le.ctx
    low, top = _pairs(ctx, ctx.k), _top_pairs(ctx)
    return HamElement(
        ctx, le.x,
        u={key: le.u[key] for key in low},
        f={key: le.a[key] for key in top},
        xi={key: le.a[key] for key in low},
        zeta={key: -le.u[key] for key in top},
    )


def R_k_inverse(he: HamElement) -> LagElement:
    ctx = he.ctx
    u = dict(he.u)
    u.update({key: -v for key, v in he.zeta.items()})
    a = dict(he.xi)
    a.update(he.f)
    return LagElement(ctx, he.x, u, a)


def _div_value(j1p: Mapping, a: int, I: MultiIndex, m: int):
    total = 0.0
    for j in range(m):
        total += j1p[MomD(a, I, j, j)]
    for J, i in decompositions(I):
        total += j1p[Mom(a, J, i)]
    return total


def _top_value(j1p: Mapping, a: int, I: MultiIndex):
    return sum(j1p[Mom(a, J, i)] for J, i in decompositions(I))


def _label(ctx, family, a, I, axis=None) -> str:
    tail = "" if axis is None else f" {ctx.independents[axis]}"
    return f"{family} {ctx.fields[a]} {I!r}{tail}"


def alpha_residuals(le: LagElement, j1p: Mapping) -> list[tuple[str, float]]:
    """Residuals of the relation between a point of J^1 P_k and a Lagrangian covector."""
    ctx = le.ctx
    out = []
    for a in range(ctx.n):
        for I in enumerate_upto(ctx.m, ctx.k):
            out.append((_label(ctx, "u", a, I), j1p[Jet(a, I)] - le.u[(a, I)]))
        for I in enumerate_upto(ctx.m, ctx.k):
            for i in range(ctx.m):
                out.append((_label(ctx, "hol", a, I, i), j1p[JetJ1(a, I, i)] - le.u[(a, I.bump(i))]))
        for I in enumerate_upto(ctx.m, ctx.k):
            out.append((_label(ctx, "div", a, I), le.a[(a, I)] - _div_value(j1p, a, I, ctx.m)))
        for I in of_order(ctx.m, ctx.lag_order):
            out.append((_label(ctx, "top", a, I), le.a[(a, I)] - _top_value(j1p, a, I)))
    return out


def beta_residuals(v: HamElement, j1p: Mapping) -> list[tuple[str, float]]:
    """Residuals of the five condition families relating ``v`` and ``j1p``."""
    ctx = v.ctx
    out = []
    for a in range(ctx.n):
        for I in enumerate_upto(ctx.m, ctx.k):
            out.append((_label(ctx, "u", a, I), j1p[Jet(a, I)] - v.u[(a, I)]))
        for I in enumerate_upto(ctx.m, ctx.k):
            for i in range(ctx.m):
                if I.order < ctx.k:
                    out.append((_label(ctx, "hol", a, I, i), j1p[JetJ1(a, I, i)] - v.u[(a, I.bump(i))]))
                else:
                    out.append((_label(ctx, "zeta", a, I, i), j1p[JetJ1(a, I, i)] + v.zeta[(a, I.bump(i))]))
        for I in enumerate_upto(ctx.m, ctx.k):
            out.append((_label(ctx, "xi", a, I), v.xi[(a, I)] - _div_value(j1p, a, I, ctx.m)))
        for I in of_order(ctx.m, ctx.lag_order):
            out.append((_label(ctx, "f", a, I), v.f[(a, I)] - _top_value(j1p, a, I)))
    return out


def related(residuals: Iterable[tuple[str, float]], tol: float = RELATION_TOL) -> bool:
    return all(abs(r) <= tol for _, r in residuals)


# --------------------------------------------------------------------------
# generating family and Hamiltonian reduction


@dataclass(frozen=True)
class GeneratingFamily:
    """F = sum_{|I|<=k} p^{I,i} u_{I+i} - L, parametrized by the top jets.

    ``reduced`` is the part that depends on top jets, sum_J q^J u_J - L, with
    q the symmetrized top momenta.  ``criticality`` maps each top jet u_J to
    dF/du_J = q^J - dL/du_J.
    """

    ctx: JetContext
    full: Expr
    reduced: Expr
    top_jets: tuple
    criticality: dict


def generating_family(L: Lagrangian) -> GeneratingFamily:
    ctx = L.ctx
    pairing = add(
        Var(Mom(a, I, i)) * Var(Jet(a, I.bump(i)))
        for a in range(ctx.n) for I in enumerate_upto(ctx.m, ctx.k) for i in range(ctx.m)
    )
    top_pairing = add(
        _top_lhs(a, J) * Var(Jet(a, J))
        for a in range(ctx.n) for J in of_order(ctx.m, ctx.lag_order)
    )
    full = normalize(pairing - L.density)
    reduced = normalize(top_pairing - L.density)
    tops = tuple(Jet(a, J) for a in range(ctx.n) for J in of_order(ctx.m, ctx.lag_order))
    crit = {y: diff(full, y) for y in tops}
    return GeneratingFamily(ctx, full, reduced, tops, crit)


@dataclass(frozen=True)
class HamiltonianResult:
    status: str                   # "regular", "singular" or "nonconstant"
    hamiltonian: Expr | None
    family: GeneratingFamily
    top_solution: dict | None     # top jet -> expression in (u, p)

    @property
    def regular(self) -> bool:
        return self.status == "regular"


def _invert(matrix: list[list[Fraction]]) -> list[list[Fraction]] | None:
    n = len(matrix)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        lead = aug[col][col]
        aug[col] = [x / lead for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def solve_top_jets(L: Lagrangian) -> tuple[str, dict | None]:
    """Solve q^J = dL/du_J for the top jets when the top Hessian is constant and invertible."""
    fam = generating_family(L)
    tops = fam.top_jets
    P = partials(L)
    grads = [P[(y.field, y.index)] for y in tops]
    hess = []
    for g in grads:
        row = []
        for y in tops:
            c = constant_value(diff(g, y))
            if c is None:
                return "nonconstant", None
            row.append(c)
        hess.append(row)
    inv = _invert(hess)
    if inv is None:
        return "singular", None
    zero_tops = {y: 0 for y in tops}
    offsets = [substitute(g, zero_tops) for g in grads]
    qs = [_top_lhs(y.field, y.index) for y in tops]
    solution = {}
    for r, y in enumerate(tops):
        terms = [Const(inv[r][c]) * (qs[c] - offsets[c]) for c in range(len(tops)) if inv[r][c] != 0]
        solution[y] = normalize(add(terms))
    return "regular", solution


def reduce_hamiltonian(L: Lagrangian) -> HamiltonianResult:
    """Eliminate the top jets from the generating family when possible."""
    fam = generating_family(L)
    status, solution = solve_top_jets(L)
    if solution is None:
        return HamiltonianResult(status, None, fam, None)
    return HamiltonianResult(status, substitute(fam.full, solution), fam, solution)
