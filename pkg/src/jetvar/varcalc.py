"""Euler-Lagrange operator, momenta reconstruction and order raising."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from .context import JetContext
from .exprlang import (
    Aux, Const, Expr, Indep, Jet, Mom, add, as_expr, diff, evaluate, exp,
    normalize, parse, print_canonical, variables,
)
from .jetcalc import SectionSpec, prolong, total_derivative, total_derivative_multi
from .multiindex import MultiIndex, decompositions, enumerate_upto, of_order


@dataclass(frozen=True)
class Lagrangian:
    """Scalar Lagrangian density of jet order at most ``ctx.lag_order``."""

    ctx: JetContext
    density: Expr

    def __post_init__(self):
        density = normalize(as_expr(self.density))
        object.__setattr__(self, "density", density)
        for v in variables(density):
            if isinstance(v, Indep):
                continue
            if not isinstance(v, Jet):
                raise ValueError("a Lagrangian depends on independents and jets only")
            if v.index.order > self.ctx.lag_order:
                raise ValueError(
                    f"jet order {v.index.order} exceeds Lagrangian order {self.ctx.lag_order}"
                )

    @classmethod
    def parse(cls, ctx: JetContext, text: str) -> Lagrangian:
        return cls(ctx, parse(text, ctx))

    def __str__(self):
        return print_canonical(self.density, self.ctx)


@lru_cache(maxsize=256)
def partials(L: Lagrangian) -> dict:
    """All dL/du^a_I for |I| <= k+1, keyed by ``(field, I)``."""
    ctx = L.ctx
    return {
        (a, I): diff(L.density, Jet(a, I))
        for a in range(ctx.n)
        for I in enumerate_upto(ctx.m, ctx.lag_order)
    }


@lru_cache(maxsize=256)
def euler_lagrange(L: Lagrangian) -> tuple:
    """E_a = sum over |I| <= k+1 of (-1)^|I| D_I(dL/du^a_I), one expression per field."""
    ctx = L.ctx
    P = partials(L)
    out = []
    for a in range(ctx.n):
        terms = []
        for I in enumerate_upto(ctx.m, ctx.lag_order):
            term = total_derivative_multi(P[(a, I)], I, ctx)
            terms.append(term if I.order % 2 == 0 else -term)
        out.append(normalize(add(terms)))
    return tuple(out)


class MomentaTable:
    """Momenta p_a^{J,i} (|J| <= k) as jet expressions along holonomic sections."""

    def __init__(self, L: Lagrangian, momenta: dict):
        self.lagrangian = L
        self.ctx = L.ctx
        self.momenta = momenta

    def __getitem__(self, key: Mom) -> Expr:
        return self.momenta[key]

    def __iter__(self):
        return iter(self.momenta)

    def __len__(self):
        return len(self.momenta)

    def items(self):
        return self.momenta.items()

    def bottom_residual(self) -> tuple:
        """dL/du^a - sum_j D_j p_a^{0,j}; equals the Euler-Lagrange expression."""
        ctx = self.ctx
        P = partials(self.lagrangian)
        zero = MultiIndex.zero(ctx.m)
        out = []
        for a in range(ctx.n):
            div = add(total_derivative(self.momenta[Mom(a, zero, j)], j, ctx) for j in range(ctx.m))
            out.append(normalize(P[(a, zero)] - div))
        return tuple(out)


@lru_cache(maxsize=256)
def momenta_reconstruct(L: Lagrangian) -> MomentaTable:
    """Momenta solving the top and divergence equations level by level.

    At each multiindex I the required total is split over the decompositions
    I = J + i with weight I_i / |I|.
    """
    ctx = L.ctx
    P = partials(L)
    table: dict = {}
    for a in range(ctx.n):
        for d in range(ctx.lag_order, 0, -1):
            for I in of_order(ctx.m, d):
                target = P[(a, I)]
                if d <= ctx.k:
                    div = add(total_derivative(table[Mom(a, I, j)], j, ctx) for j in range(ctx.m))
                    target = target - div
                for J, i in decompositions(I):
                    table[Mom(a, J, i)] = normalize(Const(Fraction(I[i], d)) * target)
    ordered = {
        Mom(a, J, i): table[Mom(a, J, i)]
        for a in range(ctx.n) for J in enumerate_upto(ctx.m, ctx.k) for i in range(ctx.m)
    }
    return MomentaTable(L, ordered)


def raise_order(L: Lagrangian, by: int = 1) -> Lagrangian:
    """The same density regarded on a higher jet bundle."""
    return Lagrangian(L.ctx.raised(by), L.density)


# --------------------------------------------------------------------------
# quadrature oracle

_S = Aux("s")
_DEFAULT_NODES = {1: 1025, 2: 257}


@lru_cache(maxsize=None)
def _bump_derivative(n: int) -> Expr:
    # n-th derivative of exp(-1/(1 - s^2)) on (-1, 1)
    e = exp(Const(-1) / (1 - as_expr(_S) ** 2))
    for _ in range(n):
        e = diff(e, _S)
    return normalize(e)


def _bump_1d(s: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    if np.any(inside):
        out[inside] = evaluate(_bump_derivative(n), {_S: s[inside]})
    return out


def functional_derivative_oracle(L: Lagrangian, s: SectionSpec, x0: Sequence[float],
                                 bump_width: float, nodes: int | None = None, eps: float = 1e-5) -> np.ndarray:
    """Bump-weighted average of the variational derivative near ``x0``.

    Computes d/de at e=0 of the action of the section perturbed by
    ``e * bump`` in one field, divided by the integral of the bump.  The action
    uses tensor-product Simpson quadrature on ``nodes`` points per axis over
    the bump's support box, and d/de a central difference with step ``eps``.

    The bump's derivatives steepen near the box edges, so the default node
    count is well above the 64-node floor: 1025 per axis in 1D, 257 in 2D.
    """
    ctx = L.ctx
    if nodes is None:
        nodes = _DEFAULT_NODES.get(ctx.m, 65)
    if bump_width <= 0 or nodes < 5:
        raise ValueError("need bump_width > 0 and at least 5 nodes")
    if len(x0) != ctx.m:
        raise ValueError(f"expected {ctx.m} coordinates for x0")
    half = bump_width / 2
    axes = [np.linspace(c - half, c + half, nodes) for c in x0]
    grids = np.meshgrid(*axes, indexing="ij")
    scaled = [np.linspace(-1.0, 1.0, nodes) for _ in range(ctx.m)]
    r = ctx.lag_order
    per_axis = [[_bump_1d(sv, n) * (1 / half) ** n for n in range(r + 1)] for sv in scaled]

    def bump_derivative(I: MultiIndex) -> np.ndarray:
        factors = [per_axis[ax][I[ax]] for ax in range(ctx.m)]
        grids_ = np.meshgrid(*factors, indexing="ij")
        return np.prod(grids_, axis=0)

    def integrate(values) -> float:
        out = np.broadcast_to(np.asarray(values, dtype=float), grids[0].shape)
        for ax in reversed(range(ctx.m)):
            out = simpson(out, x=axes[ax], axis=ax)
        return float(out)

    base = prolong(s, r, grids)
    bumps = {I: bump_derivative(I) for I in enumerate_upto(ctx.m, r)}
    weight = integrate(bumps[MultiIndex.zero(ctx.m)])
    result = np.zeros(ctx.n)
    for a in range(ctx.n):
        actions = []
        for sign in (1.0, -1.0):
            values = dict(base)
            for I, b in bumps.items():
                values[Jet(a, I)] = base[Jet(a, I)] + sign * eps * b
            actions.append(integrate(evaluate(L.density, values)))
        result[a] = (actions[0] - actions[1]) / (2 * eps) / weight
    return result
