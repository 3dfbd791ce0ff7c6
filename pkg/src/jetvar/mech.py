"""Higher-order mechanics (one independent variable, time).

Dictionary between the generic phase coordinates and mechanics names, field
index ``i`` counted from 1::

    jet level       u^(0)  u^(1)  u^(2)  u^(3)      (u^(k+1) is shown as the
    name            q_i    v_i    a_i    j_i         top level name with ')
    momentum level  p^(0)  p^(1)  p^(2)  p^(3)
    name            p_i    r_i    s_i    w_i

A prime marks a time derivative: ``q1'`` is the first-jet coordinate u_{(0);t}
and ``r1'`` the derivative of the momentum p^{(1),t}.  The dictionary carries
no signs; for second-order Lagrangians r = dL/d(v'), so ``r = -v'`` for the
javelin reads exactly as the phase equation.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .context import JetContext
from .exprlang import (
    Expr, Indep, Jet, JetJ1, Mom, MomD, Var, lambdify, normalize, print_canonical,
    substitute,
)
from .multiindex import MultiIndex
from .triple import PhaseSystem, reduce_hamiltonian, solve_top_jets
from .varcalc import Lagrangian, partials

JET_NAMES = ("q", "v", "a", "j")
MOMENTUM_NAMES = ("p", "r", "s", "w")


class IntegrationError(RuntimeError):
    def __init__(self, step: int, t: float):
        self.step = step
        self.t = t
        super().__init__(f"non-finite state at step {step} (t = {t:.17g})")


def _require_mechanics(ctx: JetContext) -> None:
    if ctx.m != 1:
        raise ValueError("mechanics needs exactly one independent variable")


# --------------------------------------------------------------------------
# coordinate shuffles of T T* T Q (per field, 8 components)


def alpha_TQ(w: Sequence) -> tuple:
    """(q, v, p, r, q', v', p', r') -> (q, v, q', v', p', r', p, r)."""
    q, v, p, r, dq, dv, dp, dr = w
    return (q, v, dq, dv, dp, dr, p, r)


def alpha_TQ_inverse(w: Sequence) -> tuple:
    q, v, dq, dv, dp, dr, p, r = w
    return (q, v, p, r, dq, dv, dp, dr)


def beta_TQ(w: Sequence) -> tuple:
    """(q, v, p, r, q', v', p', r') -> (q, v, p, r, -p', -r', q', v')."""
    q, v, p, r, dq, dv, dp, dr = w
    return (q, v, p, r, -dp, -dr, dq, dv)


def beta_TQ_inverse(w: Sequence) -> tuple:
    q, v, p, r, mdp, mdr, dq, dv = w
    return (q, v, p, r, dq, dv, -mdp, -mdr)


# --------------------------------------------------------------------------
# naming


def mech_namer(ctx: JetContext) -> Callable:
    _require_mechanics(ctx)
    if ctx.k >= len(JET_NAMES):
        raise ValueError(f"mechanics names cover Lagrangians up to order {len(JET_NAMES)}")

    def name(v) -> str:
        if isinstance(v, Indep):
            return ctx.independents[0]
        idx = str(v.field + 1)
        level = v.index[0]
        if isinstance(v, Jet):
            if level <= ctx.k:
                return JET_NAMES[level] + idx
            return JET_NAMES[level - 1] + idx + "'"
        if isinstance(v, JetJ1):
            return JET_NAMES[level] + idx + "'"
        if isinstance(v, Mom):
            return MOMENTUM_NAMES[level] + idx
        if isinstance(v, MomD):
            return MOMENTUM_NAMES[level] + idx + "'"
        return str(v)

    return name


def render_phase_system(sys: PhaseSystem) -> str:
    """Phase equations in mechanics notation, one per line, grouped by field.

    Holonomy equations are written ``v = q'``; equations that become
    tautologies under the naming (``v' = v'``) are omitted.
    """
    ctx = sys.ctx
    namer = mech_namer(ctx)
    order = {"H": 0, "DIV": 1, "TOP": 2}
    lines = []
    for eq in sorted(sys.equations, key=lambda e: (e.field, order[e.family], e.index.sort_key())):
        lhs = print_canonical(eq.lhs, namer=namer)
        rhs = print_canonical(eq.rhs, namer=namer)
        if eq.family == "H":
            lhs, rhs = rhs, lhs
        if lhs == rhs:
            continue
        lines.append(f"{lhs} = {rhs}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# explicit phase vector field


@dataclass
class MechState:
    """Jet levels u[a, l] and momenta p[a, l], 0 <= l <= k."""

    u: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.u.shape != self.p.shape or self.u.ndim != 2:
            raise ValueError("u and p must be arrays of shape (fields, levels)")

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u.ravel(), self.p.ravel()])

    @classmethod
    def from_vector(cls, y: np.ndarray, n: int, levels: int) -> MechState:
        half = n * levels
        return cls(y[:half].reshape(n, levels), y[half:].reshape(n, levels))

    @classmethod
    def from_per_field(cls, values: Sequence[float], ctx: JetContext) -> MechState:
        """Build from ``(u^(0..k), p^(0..k))`` given once for all fields or per field."""
        levels = ctx.k + 1
        values = [float(v) for v in values]
        if len(values) == 2 * levels:
            values = values * ctx.n
        if len(values) != 2 * levels * ctx.n:
            raise ValueError(
                f"initial state needs {2 * levels} values (broadcast) or {2 * levels * ctx.n}"
            )
        arr = np.array(values).reshape(ctx.n, 2, levels)
        return cls(arr[:, 0, :], arr[:, 1, :])


def state_variables(ctx: JetContext) -> list:
    """Phase variables in state-vector order: all jet levels, then all momenta."""
    levels = range(ctx.k + 1)
    jets = [Jet(a, MultiIndex((l,))) for a in range(ctx.n) for l in levels]
    moms = [Mom(a, MultiIndex((l,)), 0) for a in range(ctx.n) for l in levels]
    return jets + moms


@dataclass
class PhaseVectorField:
    ctx: JetContext
    lagrangian: Lagrangian
    exprs: list            # time derivative of each state variable
    hamiltonian: Expr | None

    def __post_init__(self):
        args = [Indep(0)] + state_variables(self.ctx)
        self._f = lambdify(self.exprs, args)
        self._h = lambdify([self.hamiltonian], args) if self.hamiltonian is not None else None

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        return np.array(self._f(t, *y), dtype=float)

    def energy(self, t: float, y: np.ndarray) -> float | None:
        if self._h is None:
            return None
        return float(self._h(t, *y)[0])


def phase_vector_field(L: Lagrangian) -> PhaseVectorField | None:
    """Explicit first-order system for a regular Lagrangian; ``None`` when singular.

    u^(l)' = u^(l+1) for l < k, u^(k)' = solved top jet, and
    p^(l)' = dL/du^(l) - p^(l-1) from the divergence equations.
    """
    ctx = L.ctx
    _require_mechanics(ctx)
    status, solution = solve_top_jets(L)
    if solution is None:
        return None
    P = partials(L)
    du, dp = [], []
    for a in range(ctx.n):
        for l in range(ctx.k + 1):
            nxt = Jet(a, MultiIndex((l + 1,)))
            du.append(solution[nxt] if l == ctx.k else Var(nxt))
            rate = substitute(P[(a, MultiIndex((l,)))], solution)
            if l > 0:
                rate = rate - Var(Mom(a, MultiIndex((l - 1,)), 0))
            dp.append(normalize(rate))
    ham = reduce_hamiltonian(L).hamiltonian
    return PhaseVectorField(ctx, L, du + dp, ham)


# --------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    ctx: JetContext
    t: np.ndarray
    states: np.ndarray           # (nodes, state size)
    energy: np.ndarray | None

    def state(self, i: int) -> MechState:
        return MechState.from_vector(self.states[i], self.ctx.n, self.ctx.k + 1)

    def series(self, field_: int, level: int, momentum: bool = False) -> np.ndarray:
        levels = self.ctx.k + 1
        offset = self.ctx.n * levels if momentum else 0
        return self.states[:, offset + field_ * levels + level]

    def header(self) -> list[str]:
        levels = range(self.ctx.k + 1)
        cols = ["t"]
        cols += [f"{f}_{l}" for f in self.ctx.fields for l in levels]
        cols += [f"p_{f}_{l}" for f in self.ctx.fields for l in levels]
        if self.energy is not None:
            cols.append("H")
        return cols

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(self.header()) + "\n")
        for i, t in enumerate(self.t):
            row = [t, *self.states[i]]
            if self.energy is not None:
                row.append(self.energy[i])
            out.write(",".join("%.17g" % float(x) for x in row) + "\n")
        return out.getvalue()


def rk4_integrate(field: PhaseVectorField, init: MechState, dt: float, T: float,
                  monitor: bool = True) -> Trajectory:
    """Classical fixed-step Runge-Kutta from t = 0 to t = T.

    The last step is shortened so the grid ends exactly at T.
    """
    if not (dt > 0 and T > 0 and math.isfinite(dt) and math.isfinite(T)):
        raise ValueError("need finite dt > 0 and T > 0")
    steps = max(1, math.ceil(T / dt - 1e-9))
    y = init.vector()
    if y.size != len(state_variables(field.ctx)):
        raise ValueError("initial state does not match the problem size")
    ts = np.empty(steps + 1)
    ys = np.empty((steps + 1, y.size))
    ts[0], ys[0] = 0.0, y
    t = 0.0
    for i in range(steps):
        h = dt if i < steps - 1 else T - t
        with np.errstate(over="ignore", invalid="ignore"):   # caught by the finiteness check
            k1 = field(t, y)
            k2 = field(t + h / 2, y + h / 2 * k1)
            k3 = field(t + h / 2, y + h / 2 * k2)
            k4 = field(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (i + 1) * dt if i < steps - 1 else T
        if not np.all(np.isfinite(y)):
            raise IntegrationError(i + 1, t)
        ts[i + 1], ys[i + 1] = t, y
    energy = None
    if monitor and field.hamiltonian is not None:
        energy = np.array([field.energy(t_, y_) for t_, y_ in zip(ts, ys)])
    return Trajectory(field.ctx, ts, ys, energy)
