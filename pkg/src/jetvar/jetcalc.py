"""Total derivatives, prolongation of closed-form sections, holonomy residuals."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .context import JetContext
from .exprlang import (
    Expr, Indep, Jet, JetJ1, Mom, MomD, Var, add, as_expr, diff, evaluate,
    normalize, parse, resolve_token, var_name, variables,
)
from .multiindex import MultiIndex, decompositions, enumerate_upto, of_order

__all__ = [
    "JetContext", "SectionSpec", "PhaseSectionSpec", "J1JkPoint",
    "total_derivative", "total_derivative_multi", "prolong",
    "holonomy_pairs", "holonomy_residuals",
]


def _only_independents(e: Expr, what: str) -> None:
    bad = [v for v in variables(e) if not isinstance(v, Indep)]
    if bad:
        raise ValueError(f"{what} may depend on independent variables only")


class SectionSpec:
    """A local section u^a = f^a(x), one closed-form expression per field."""

    def __init__(self, ctx: JetContext, exprs: Sequence):
        if len(exprs) != ctx.n:
            raise ValueError(f"expected {ctx.n} field expressions, got {len(exprs)}")
        self.ctx = ctx
        self.exprs = tuple(normalize(as_expr(e)) for e in exprs)
        for e in self.exprs:
            _only_independents(e, "a section")
        self._derivs: dict = {}

    @classmethod
    def parse(cls, ctx: JetContext, texts: Mapping[str, str]) -> SectionSpec:
        missing = [f for f in ctx.fields if f not in texts]
        if missing:
            raise ValueError(f"section misses fields {missing}")
        extra = [f for f in texts if f not in ctx.fields]
        if extra:
            raise ValueError(f"section names unknown fields {extra}")
        return cls(ctx, [parse(texts[f], ctx, max_order=0) for f in ctx.fields])

    def derivative(self, field_: int, index: MultiIndex) -> Expr:
        """Partial derivative d^I f^field as an expression in the independents."""
        index = MultiIndex(index)
        key = (field_, index)
        if key not in self._derivs:
            if index.order == 0:
                out = self.exprs[field_]
            else:
                lower, axis = decompositions(index)[0]
                out = diff(self.derivative(field_, lower), Indep(axis))
            self._derivs[key] = out
        return self._derivs[key]

    def jet_substitution(self, r: int) -> dict:
        """Map Jet(a, I), |I| <= r, to the section's derivative expressions."""
        return {
            Jet(a, I): self.derivative(a, I)
            for a in range(self.ctx.n)
            for I in enumerate_upto(self.ctx.m, r)
        }


class PhaseSectionSpec:
    """Momenta p_a^{I,i}(x) for |I| <= k along a section."""

    def __init__(self, ctx: JetContext, momenta: Mapping):
        self.ctx = ctx
        wanted = [
            Mom(a, I, i)
            for a in range(ctx.n)
            for I in enumerate_upto(ctx.m, ctx.k)
            for i in range(ctx.m)
        ]
        missing = [w for w in wanted if w not in momenta]
        if missing:
            raise ValueError(f"phase section misses {len(missing)} momentum components")
        extra = [v for v in momenta if v not in set(wanted)]
        if extra:
            raise ValueError("phase section names momenta outside the index set")
        self.momenta = {w: normalize(as_expr(momenta[w])) for w in wanted}
        for e in self.momenta.values():
            _only_independents(e, "a phase section")

    @classmethod
    def parse(cls, ctx: JetContext, texts: Mapping[str, str], fill_zero: bool = False) -> PhaseSectionSpec:
        momenta = {}
        for token, text in texts.items():
            v = resolve_token(token, ctx, allow_momenta=True)
            if not isinstance(v, Mom):
                raise ValueError(f"{token!r} is not a momentum token")
            momenta[v] = parse(text, ctx, max_order=0)
        if fill_zero:
            for a in range(ctx.n):
                for I in enumerate_upto(ctx.m, ctx.k):
                    for i in range(ctx.m):
                        momenta.setdefault(Mom(a, I, i), 0)
        return cls(ctx, momenta)

    def substitution(self, with_derivatives: bool = True) -> dict:
        out: dict = dict(self.momenta)
        if with_derivatives:
            for v, e in self.momenta.items():
                for j in range(self.ctx.m):
                    out[v.d(j)] = diff(e, Indep(j))
        return out


@dataclass
class J1JkPoint:
    """A point of J^1 J^k: x, u_I (|I| <= k) and u_{I,i}."""

    ctx: JetContext
    x: tuple
    u: dict = field(default_factory=dict)     # (field, I) -> value
    u1: dict = field(default_factory=dict)    # (field, I, axis) -> value

    def __post_init__(self):
        ctx = self.ctx
        if len(self.x) != ctx.m:
            raise ValueError("wrong number of independent coordinates")
        self.u = {(a, MultiIndex(I)): v for (a, I), v in self.u.items()}
        self.u1 = {(a, MultiIndex(I), i): v for (a, I, i), v in self.u1.items()}
        for a in range(ctx.n):
            for I in enumerate_upto(ctx.m, ctx.k):
                if (a, I) not in self.u:
                    raise ValueError(f"missing jet coordinate for field {a}, index {I}")
                for i in range(ctx.m):
                    if (a, I, i) not in self.u1:
                        raise ValueError(f"missing first-jet coordinate ({a}, {I}, {i})")

    @classmethod
    def from_section(cls, s: SectionSpec, x: Sequence[float]) -> J1JkPoint:
        ctx = s.ctx
        values = prolong(s, ctx.k + 1, x)
        u = {(a, I): values[Jet(a, I)] for a in range(ctx.n) for I in enumerate_upto(ctx.m, ctx.k)}
        u1 = {
            (a, I, i): values[Jet(a, I.bump(i))]
            for a in range(ctx.n) for I in enumerate_upto(ctx.m, ctx.k) for i in range(ctx.m)
        }
        return cls(ctx, tuple(x), u, u1)

    def assignment(self) -> dict:
        out = {Indep(i): xi for i, xi in enumerate(self.x)}
        out.update({Jet(a, I): v for (a, I), v in self.u.items()})
        out.update({JetJ1(a, I, i): v for (a, I, i), v in self.u1.items()})
        return out


def total_derivative(e, axis: int, ctx: JetContext) -> Expr:
    """D_i e = de/dx^i + sum over jets of u_{I+i} de/du_I."""
    e = as_expr(e)
    if not 0 <= axis < ctx.m:
        raise IndexError(f"axis {axis} out of range")
    vs = variables(e)
    if any(isinstance(v, (Mom, MomD, JetJ1)) for v in vs):
        raise ValueError("total derivative is defined on jet functions only")
    terms = [diff(e, Indep(axis))]
    for v in sorted((v for v in vs if isinstance(v, Jet)), key=lambda v: v.sort_key()):
        terms.append(Var(Jet(v.field, v.index.bump(axis))) * diff(e, v))
    return normalize(add(terms))


def total_derivative_multi(e, index: Sequence[int], ctx: JetContext) -> Expr:
    out = normalize(as_expr(e))
    for axis, count in enumerate(index):
        for _ in range(count):
            out = total_derivative(out, axis, ctx)
    return out


def prolong(s: SectionSpec, r: int, x: Sequence) -> dict:
    """Values of x^i and u_I (|I| <= r) on the r-th prolongation of ``s`` at ``x``.

    Coordinates of ``x`` may be numpy arrays; values broadcast elementwise.
    """
    if r < 0:
        raise ValueError("prolongation order must be >= 0")
    ctx = s.ctx
    if len(x) != ctx.m:
        raise ValueError(f"expected {ctx.m} coordinates, got {len(x)}")
    point = {Indep(i): xi for i, xi in enumerate(x)}
    shape = np.broadcast(*[np.asarray(xi) for xi in x]).shape
    out = dict(point)
    for a in range(ctx.n):
        for I in enumerate_upto(ctx.m, r):
            val = evaluate(s.derivative(a, I), point)
            if shape:
                val = np.broadcast_to(np.asarray(val, dtype=float), shape)
            out[Jet(a, I)] = val
    return out


def holonomy_pairs(ctx: JetContext) -> list[tuple[str, JetJ1 | Jet, JetJ1 | Jet]]:
    """Holonomy conditions on J^1 J^k as (kind, lhs, rhs) variable pairs.

    ``("H", u_{I,i}, u_{I+i})`` for |I| < k, and ``("SYM", u_{J,j}, u_{I,i})``
    for |I| = |J| = k with I+i = J+j (each compared with the first
    decomposition of the common top index).
    """
    out = []
    for a in range(ctx.n):
        for I in enumerate_upto(ctx.m, ctx.k - 1) if ctx.k >= 1 else []:
            for i in range(ctx.m):
                out.append(("H", JetJ1(a, I, i), Jet(a, I.bump(i))))
        for top in of_order(ctx.m, ctx.k + 1):
            decs = decompositions(top)
            J0, j0 = decs[0]
            for J, j in decs[1:]:
                out.append(("SYM", JetJ1(a, J, j), JetJ1(a, J0, j0)))
    return out


def holonomy_residuals(w: J1JkPoint) -> list[tuple[str, float]]:
    """Named residuals; all vanish iff ``w`` is a holonomic (k+1)-jet."""
    values = w.assignment()
    ctx = w.ctx
    out = []
    for kind, lhs, rhs in holonomy_pairs(ctx):
        name = f"{kind} {var_name(lhs, ctx)} - {var_name(rhs, ctx)}"
        out.append((name, values[lhs] - values[rhs]))
    return out
