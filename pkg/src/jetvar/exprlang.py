"""Expressions over independent variables, jet coordinates and momenta.

Expressions are immutable ASTs.  ``normalize`` maps an AST to a canonical
form built from an exact Laurent-polynomial representation: a sum of rational
coefficients times products of *atoms* (variables, unary function applications
and irreducible sums in denominators) raised to integer powers.  Polynomial
identities therefore normalize to structurally equal trees; identities that
involve transcendental functions are checked with :func:`equal_numeric`.

Token syntax (``ctx`` fixes the names)::

    t, x, y           independent variables
    q1, q1_t, u1_xy   jet coordinates (suffix order does not matter)
    q1_t;t            first-jet coordinate u_{I,i} of J^1 J^k
    pq1_t$t           momentum p^{I,i}
    pq1_t$t;t         its first derivative along an independent axis
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .context import JetContext
from .multiindex import MultiIndex, parse_suffix

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")

# Seed for the random-evaluation identity oracle: the bytes of "JETVAR".
IDENTITY_SEED = int.from_bytes(b"JETVAR", "big")


class ParseError(ValueError):
    def __init__(self, message: str, pos: int | None = None, text: str | None = None):
        self.pos = pos
        self.text = text
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")


class EvaluationError(ValueError):
    pass


# --------------------------------------------------------------------------
# variable identifiers


def _as_index(index) -> MultiIndex:
    return index if isinstance(index, MultiIndex) else MultiIndex(index)


@dataclass(frozen=True)
class Indep:
    axis: int

    def sort_key(self) -> tuple:
        return (0, self.axis)


@dataclass(frozen=True)
class Jet:
    """Jet coordinate u^field_index."""

    field: int
    index: MultiIndex

    def __post_init__(self):
        object.__setattr__(self, "index", _as_index(self.index))

    def sort_key(self) -> tuple:
        return (1, self.field, self.index.sort_key())


@dataclass(frozen=True)
class JetJ1:
    """Coordinate u^field_{index,axis} of J^1 J^k (not assumed holonomic)."""

    field: int
    index: MultiIndex
    axis: int

    def __post_init__(self):
        object.__setattr__(self, "index", _as_index(self.index))

    def sort_key(self) -> tuple:
        return (2, self.field, self.index.sort_key(), self.axis)


@dataclass(frozen=True)
class Mom:
    """Momentum p_field^{index,axis}."""

    field: int
    index: MultiIndex
    axis: int

    def __post_init__(self):
        object.__setattr__(self, "index", _as_index(self.index))

    def sort_key(self) -> tuple:
        return (3, self.field, self.index.sort_key(), self.axis, -1)

    def d(self, daxis: int) -> MomD:
        return MomD(self.field, self.index, self.axis, daxis)


@dataclass(frozen=True)
class MomD:
    """First derivative p_{field,daxis}^{index,axis} of a momentum."""

    field: int
    index: MultiIndex
    axis: int
    daxis: int

    def __post_init__(self):
        object.__setattr__(self, "index", _as_index(self.index))

    def sort_key(self) -> tuple:
        return (3, self.field, self.index.sort_key(), self.axis, self.daxis)


@dataclass(frozen=True)
class Aux:
    name: str

    def sort_key(self) -> tuple:
        return (4, self.name)


VarId = Indep | Jet | JetJ1 | Mom | MomD | Aux
_VAR_TYPES = (Indep, Jet, JetJ1, Mom, MomD, Aux)


def var_name(v: VarId, ctx: JetContext | None = None) -> str:
    """Textual token for a variable; generic names are used without a context."""
    if isinstance(v, Aux):
        return v.name
    if ctx is None:
        m = len(v.index) if hasattr(v, "index") else v.axis + 1
        indeps = tuple(f"x{i + 1}" for i in range(max(m, 1)))
        fields = (f"u{v.field + 1}",) if hasattr(v, "field") else ()
        fieldname = fields[0] if fields else ""
    else:
        indeps = ctx.independents
        fieldname = ctx.fields[v.field] if hasattr(v, "field") else ""
    if isinstance(v, Indep):
        return indeps[v.axis] if ctx is not None else f"x{v.axis + 1}"
    suffix = v.index.suffix(indeps)
    if isinstance(v, Jet):
        return fieldname + ("_" + suffix if suffix else "")
    if isinstance(v, JetJ1):
        return fieldname + ("_" + suffix if suffix else "") + ";" + indeps[v.axis]
    head = "p" + fieldname + ("_" + suffix if suffix else "") + "$" + indeps[v.axis]
    if isinstance(v, Mom):
        return head
    return head + ";" + indeps[v.daxis]


# --------------------------------------------------------------------------
# AST


def _cache():
    return field(default=None, init=False, repr=False, compare=False)


class Expr:
    """Base class for expression nodes; supports the usual arithmetic operators."""

    __slots__ = ()

    def __add__(self, other):
        return Add((self, as_expr(other)))

    def __radd__(self, other):
        return Add((as_expr(other), self))

    def __sub__(self, other):
        return Add((self, Neg(as_expr(other))))

    def __rsub__(self, other):
        return Add((as_expr(other), Neg(self)))

    def __mul__(self, other):
        return Mul((self, as_expr(other)))

    def __rmul__(self, other):
        return Mul((as_expr(other), self))

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __pow__(self, exp):
        if isinstance(exp, Const) and exp.value.denominator == 1:
            exp = int(exp.value)
        if not isinstance(exp, int):
            raise TypeError("only integer powers are supported")
        return Pow(self, exp)

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Fraction
    _poly: object = _cache()

    def __post_init__(self):
        v = self.value
        if isinstance(v, float):
            if not math.isfinite(v):
                raise ValueError("non-finite constant")
            v = Fraction(repr(v))
        object.__setattr__(self, "value", Fraction(v))


@dataclass(frozen=True, eq=True)
class Var(Expr):
    var: VarId
    _poly: object = _cache()


@dataclass(frozen=True, eq=True)
class Add(Expr):
    terms: tuple
    _poly: object = _cache()


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    factors: tuple
    _poly: object = _cache()


@dataclass(frozen=True, eq=True)
class Div(Expr):
    num: Expr
    den: Expr
    _poly: object = _cache()


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exp: int
    _poly: object = _cache()


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str
    arg: Expr
    _poly: object = _cache()

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    _poly: object = _cache()


ZERO = Const(0)
ONE = Const(1)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, _VAR_TYPES):
        return Var(x)
    if isinstance(x, (int, float, Fraction)):
        return Const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def add(terms: Iterable) -> Expr:
    terms = [as_expr(t) for t in terms]
    if not terms:
        return ZERO
    return terms[0] if len(terms) == 1 else Add(tuple(terms))


def mul(factors: Iterable) -> Expr:
    factors = [as_expr(f) for f in factors]
    if not factors:
        return ONE
    return factors[0] if len(factors) == 1 else Mul(tuple(factors))


def sin(e) -> Expr:
    return Func("sin", as_expr(e))


def cos(e) -> Expr:
    return Func("cos", as_expr(e))


def exp(e) -> Expr:
    return Func("exp", as_expr(e))


def log(e) -> Expr:
    return Func("log", as_expr(e))


def sqrt(e) -> Expr:
    return Func("sqrt", as_expr(e))


# --------------------------------------------------------------------------
# canonical Laurent-polynomial form


@dataclass(frozen=True)
class _FuncAtom:
    name: str
    arg: _Poly


@dataclass(frozen=True)
class _SumAtom:
    # primitive multi-term polynomial (leading coefficient 1), only ever
    # raised to negative powers inside a monomial
    poly: _Poly


def _atom_key(a) -> tuple:
    if isinstance(a, _FuncAtom):
        return (1, FUNCTIONS.index(a.name), a.arg.key())
    if isinstance(a, _SumAtom):
        return (2, a.poly.key())
    return (0, a.sort_key())


def _mono_key(mono) -> tuple:
    return tuple((_atom_key(a), e) for a, e in mono)


def _term_key(mono) -> tuple:
    return (len(mono) == 0, _mono_key(mono))


class _Poly:
    """Map from monomials (sorted tuples of (atom, exponent)) to Fractions."""

    __slots__ = ("terms", "_key", "_vars", "_expr")

    def __init__(self, terms: Mapping | None = None):
        self.terms = {m: c for m, c in (terms or {}).items() if c != 0}
        self._key = None
        self._vars = None
        self._expr = None

    @staticmethod
    def const(c) -> _Poly:
        return _Poly({(): Fraction(c)})

    @staticmethod
    def atom(a) -> _Poly:
        return _Poly({((a, 1),): Fraction(1)})

    def key(self) -> tuple:
        if self._key is None:
            self._key = tuple(
                (_mono_key(m), self.terms[m]) for m in self.sorted_monomials()
            )
        return self._key

    def sorted_monomials(self) -> list:
        return sorted(self.terms, key=_term_key)

    def __eq__(self, other):
        return isinstance(other, _Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(self.key())

    def constant_value(self) -> Fraction | None:
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1 and () in self.terms:
            return self.terms[()]
        return None

    def variables(self) -> frozenset:
        if self._vars is None:
            out = set()
            for mono in self.terms:
                for a, _ in mono:
                    if isinstance(a, _FuncAtom):
                        out |= a.arg.variables()
                    elif isinstance(a, _SumAtom):
                        out |= a.poly.variables()
                    else:
                        out.add(a)
            self._vars = frozenset(out)
        return self._vars

    def __add__(self, other: _Poly) -> _Poly:
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, 0) + c
        return _Poly(terms)

    def scale(self, c) -> _Poly:
        c = Fraction(c)
        if c == 0:
            return _Poly()
        return _Poly({m: v * c for m, v in self.terms.items()})

    def __neg__(self) -> _Poly:
        return self.scale(-1)

    def __sub__(self, other: _Poly) -> _Poly:
        return self + (-other)

    def __mul__(self, other: _Poly) -> _Poly:
        out: dict = {}
        extra = []
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono, pending = _mono_mul(m1, m2)
                if pending is None:
                    out[mono] = out.get(mono, 0) + c1 * c2
                else:
                    extra.append(pending.scale(c1 * c2))
        result = _Poly(out)
        for p in extra:
            result = result + p
        return result

    def __pow__(self, n: int) -> _Poly:
        if n == 0:
            return _Poly.const(1)
        if n > 0:
            result = _Poly.const(1)
            base = self
            while n:
                if n & 1:
                    result = result * base
                n >>= 1
                if n:
                    base = base * base
            return result
        if len(self.terms) == 1:
            (mono, c), = self.terms.items()
            inv = {}
            for a, e in mono:
                inv[a] = e * n
            return _from_factors(Fraction(c) ** n, inv)
        if not self.terms:
            return _Poly.atom_power(_SumAtom(_Poly()), n)
        lead = self.terms[self.sorted_monomials()[0]]
        primitive = self.scale(1 / lead)
        return _Poly.atom_power(_SumAtom(primitive), n).scale(lead ** n)

    @staticmethod
    def atom_power(a, e: int) -> _Poly:
        return _Poly({((a, e),): Fraction(1)})

    def diff(self, v) -> _Poly:
        if v not in self.variables():
            return _Poly()
        result = _Poly()
        for mono, c in self.terms.items():
            for pos, (a, e) in enumerate(mono):
                da = _atom_diff(a, v)
                if not da.terms:
                    continue
                rest = {b: f for j, (b, f) in enumerate(mono) if j != pos}
                if e != 1:
                    rest[a] = e - 1
                result = result + _from_factors(c * e, rest) * da
        return result


def _mono_mul(m1, m2):
    """Multiply two monomials.

    Returns ``(mono, None)`` normally and ``(None, poly)`` when a denominator
    atom ends up with a positive exponent and must be expanded.
    """
    if not m1:
        return m2, None
    if not m2:
        return m1, None
    exps = dict(m1)
    for a, e in m2:
        exps[a] = exps.get(a, 0) + e
    if any(isinstance(a, _SumAtom) and e > 0 for a, e in exps.items()):
        return None, _from_factors(Fraction(1), exps)
    return _sorted_mono(exps), None


def _sorted_mono(exps: Mapping) -> tuple:
    return tuple(sorted(((a, e) for a, e in exps.items() if e != 0), key=lambda t: _atom_key(t[0])))


def _from_factors(c: Fraction, exps: Mapping) -> _Poly:
    plain = {}
    expand = []
    for a, e in exps.items():
        if e == 0:
            continue
        if isinstance(a, _SumAtom) and e > 0:
            expand.append(a.poly ** e)
        else:
            plain[a] = e
    result = _Poly({_sorted_mono(plain): Fraction(c)})
    for p in expand:
        result = result * p
    return result


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def _func_poly(name: str, arg: _Poly) -> _Poly:
    c = arg.constant_value()
    if c is not None:
        if name == "sin" and c == 0:
            return _Poly()
        if name in ("cos", "exp") and c == 0:
            return _Poly.const(1)
        if name == "log" and c == 1:
            return _Poly()
        if name == "sqrt" and _is_square(c.numerator) and _is_square(c.denominator):
            return _Poly.const(Fraction(math.isqrt(c.numerator), math.isqrt(c.denominator)))
    return _Poly.atom(_FuncAtom(name, arg))


def _atom_diff(a, v) -> _Poly:
    if isinstance(a, _SumAtom):
        return a.poly.diff(v)
    if isinstance(a, _FuncAtom):
        darg = a.arg.diff(v)
        if not darg.terms:
            return _Poly()
        if a.name == "sin":
            outer = _func_poly("cos", a.arg)
        elif a.name == "cos":
            outer = -_func_poly("sin", a.arg)
        elif a.name == "exp":
            outer = _Poly.atom(a)
        elif a.name == "log":
            outer = a.arg ** -1
        else:
            outer = (_Poly.atom(a) ** -1).scale(Fraction(1, 2))
        return outer * darg
    return _Poly.const(1) if a == v else _Poly()


def _to_poly(e: Expr) -> _Poly:
    cached = e._poly
    if cached is not None:
        return cached
    if isinstance(e, Const):
        p = _Poly.const(e.value)
    elif isinstance(e, Var):
        p = _Poly.atom(e.var)
    elif isinstance(e, Add):
        p = _Poly()
        for t in e.terms:
            p = p + _to_poly(t)
    elif isinstance(e, Mul):
        p = _Poly.const(1)
        for f in e.factors:
            p = p * _to_poly(f)
    elif isinstance(e, Div):
        p = _to_poly(e.num) * (_to_poly(e.den) ** -1)
    elif isinstance(e, Pow):
        p = _to_poly(e.base) ** e.exp
    elif isinstance(e, Func):
        p = _func_poly(e.name, _to_poly(e.arg))
    elif isinstance(e, Neg):
        p = -_to_poly(e.arg)
    else:
        raise TypeError(f"not an expression node: {e!r}")
    object.__setattr__(e, "_poly", p)
    return p


def _from_poly(p: _Poly) -> Expr:
    if p._expr is not None:
        return p._expr
    terms = [_mono_expr(m, p.terms[m]) for m in p.sorted_monomials()]
    if not terms:
        out = Const(0)
    elif len(terms) == 1:
        out = terms[0]
    else:
        out = Add(tuple(terms))
    object.__setattr__(out, "_poly", p)
    p._expr = out
    return out


def _mono_expr(mono, c: Fraction) -> Expr:
    factors = []
    for a, e in mono:
        if isinstance(a, _FuncAtom):
            base = Func(a.name, _from_poly(a.arg))
        elif isinstance(a, _SumAtom):
            base = _from_poly(a.poly)
        else:
            base = Var(a)
        factors.append(base if e == 1 else Pow(base, e))
    if not factors:
        return Const(c)
    if c != 1:
        factors.insert(0, Const(c))
    return factors[0] if len(factors) == 1 else Mul(tuple(factors))


# --------------------------------------------------------------------------
# symbolic operations


def normalize(e) -> Expr:
    """Canonical form: expanded, constants merged, factors and terms sorted."""
    return _from_poly(_to_poly(as_expr(e)))


def diff(e, v: VarId) -> Expr:
    """Exact partial derivative with respect to one variable, normalized."""
    return _from_poly(_to_poly(as_expr(e)).diff(v))


def variables(e) -> frozenset:
    return _to_poly(as_expr(e)).variables()


def _tree_variables(e: Expr) -> set:
    """Variables occurring anywhere in the tree, including ones that cancel."""
    out, stack = set(), [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.var)
        elif isinstance(node, (Add, Mul)):
            stack.extend(node.terms if isinstance(node, Add) else node.factors)
        elif isinstance(node, Div):
            stack.extend((node.num, node.den))
        elif isinstance(node, (Pow, Func, Neg)):
            stack.append(node.base if isinstance(node, Pow) else node.arg)
    return out


def is_zero(e) -> bool:
    return not _to_poly(as_expr(e)).terms


def constant_value(e) -> Fraction | None:
    """The exact value of ``e`` when it normalizes to a constant, else ``None``."""
    return _to_poly(as_expr(e)).constant_value()


def substitute(e, mapping: Mapping) -> Expr:
    """Replace variables by expressions (or numbers) and normalize."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    return normalize(_subst(as_expr(e), mapping))


def _subst(e: Expr, mapping: Mapping) -> Expr:
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return mapping.get(e.var, e)
    if isinstance(e, Add):
        return Add(tuple(_subst(t, mapping) for t in e.terms))
    if isinstance(e, Mul):
        return Mul(tuple(_subst(f, mapping) for f in e.factors))
    if isinstance(e, Div):
        return Div(_subst(e.num, mapping), _subst(e.den, mapping))
    if isinstance(e, Pow):
        return Pow(_subst(e.base, mapping), e.exp)
    if isinstance(e, Func):
        return Func(e.name, _subst(e.arg, mapping))
    if isinstance(e, Neg):
        return Neg(_subst(e.arg, mapping))
    raise TypeError(f"not an expression node: {e!r}")


def jet_order(e) -> int:
    """Highest jet order among ``Jet`` variables of ``e`` (-1 when there are none)."""
    orders = [v.index.order for v in variables(e) if isinstance(v, Jet)]
    return max(orders, default=-1)


# --------------------------------------------------------------------------
# evaluation

_NUMPY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt}


def evaluate(e, assignment: Mapping):
    """Evaluate with floats or numpy arrays (broadcast elementwise)."""
    e = as_expr(e)
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Var):
        try:
            return assignment[e.var]
        except KeyError:
            raise EvaluationError(f"no value assigned to {var_name(e.var)}") from None
    if isinstance(e, Add):
        total = 0.0
        for t in e.terms:
            total = total + evaluate(t, assignment)
        return total
    if isinstance(e, Mul):
        prod = 1.0
        for f in e.factors:
            prod = prod * evaluate(f, assignment)
        return prod
    if isinstance(e, Div):
        den = evaluate(e.den, assignment)
        if np.any(np.asarray(den) == 0):
            raise EvaluationError("division by zero")
        return evaluate(e.num, assignment) / den
    if isinstance(e, Pow):
        base = evaluate(e.base, assignment)
        if e.exp < 0:
            if np.any(np.asarray(base) == 0):
                raise EvaluationError("division by zero")
            return 1.0 / base ** (-e.exp)
        return base ** e.exp
    if isinstance(e, Func):
        arg = evaluate(e.arg, assignment)
        if e.name == "log" and np.any(np.asarray(arg) <= 0):
            raise EvaluationError("log of a non-positive value")
        if e.name == "sqrt" and np.any(np.asarray(arg) < 0):
            raise EvaluationError("sqrt of a negative value")
        return _NUMPY_FUNCS[e.name](arg)
    if isinstance(e, Neg):
        return -evaluate(e.arg, assignment)
    raise TypeError(f"not an expression node: {e!r}")


@dataclass(frozen=True)
class IdentityReport:
    equal: bool
    trials: int
    max_error: float
    worst: dict | None = None

    def __bool__(self) -> bool:
        return self.equal


def equal_numeric(e1, e2, trials: int = 20, tol: float = 1e-9, seed: int = IDENTITY_SEED,
                  low: float = -2.0, high: float = 2.0) -> IdentityReport:
    """Probabilistic identity test at random points of ``[low, high]``.

    Passes when ``|e1 - e2| <= tol * (1 + |e1|)`` at every sample.  A sample at
    which either side is undefined is redrawn, at most 10 times.
    """
    if trials < 1 or tol <= 0:
        raise ValueError("need trials >= 1 and tol > 0")
    e1, e2 = as_expr(e1), as_expr(e2)
    names = sorted(_tree_variables(e1) | _tree_variables(e2), key=lambda v: v.sort_key())
    rng = np.random.default_rng(seed)
    max_err = 0.0
    worst = None
    for _ in range(trials):
        for attempt in range(11):
            point = {v: float(x) for v, x in zip(names, rng.uniform(low, high, len(names)))}
            try:
                a = float(evaluate(e1, point))
                b = float(evaluate(e2, point))
            except EvaluationError:
                if attempt == 10:
                    raise
                continue
            break
        err = abs(a - b) / (1.0 + abs(a))
        if not err <= max_err:
            max_err, worst = err, point
    return IdentityReport(max_err <= tol, trials, max_err, worst)


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*(?:\$[A-Za-z][A-Za-z0-9]*)?(?:;[A-Za-z][A-Za-z0-9]*)?)
  | (?P<op>\*\*|[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if value == "**":
                value = "^"
            tokens.append((kind, value, pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, resolve):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.resolve = resolve

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, v, pos = self.take()
        if v != value:
            found = "end of input" if kind == "end" else repr(v)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def error(self, message):
        raise ParseError(message, self.peek()[2], self.text)

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else Neg(t))
        return terms[0] if len(terms) == 1 else Add(tuple(terms))

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.factor()
            if op == "*":
                e = Mul(e.factors + (rhs,)) if isinstance(e, Mul) else Mul((e, rhs))
            else:
                e = Div(e, rhs)
        return e

    def factor(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.factor())
        if self.peek()[1] == "+":
            self.take()
            return self.factor()
        base = self.base()
        if self.peek()[1] == "^":
            self.take()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        paren = self.peek()[1] == "("
        if paren:
            self.take()
        sign = 1
        if self.peek()[1] in ("-", "+"):
            sign = -1 if self.take()[1] == "-" else 1
        kind, value, pos = self.take()
        if kind != "num" or not value.isdigit():
            raise ParseError("exponent must be an integer", pos, self.text)
        if paren:
            self.expect(")")
        return sign * int(value)

    def base(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "num":
            return Const(Fraction(value))
        if value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            if value in FUNCTIONS and self.peek()[1] == "(":
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(value, arg)
            try:
                return Var(self.resolve(value))
            except (KeyError, ValueError) as exc:
                msg = exc.args[0] if exc.args else str(exc)
                raise ParseError(str(msg), pos, self.text) from None
        found = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"unexpected {found}", pos, self.text)


_IDENT = re.compile(
    r"(?P<head>[A-Za-z][A-Za-z0-9_]*)(?:\$(?P<axis>[A-Za-z][A-Za-z0-9]*))?(?:;(?P<daxis>[A-Za-z][A-Za-z0-9]*))?\Z"
)


def resolve_token(token: str, ctx: JetContext, allow_momenta: bool = False,
                  max_order: int | None = None, aux: Sequence[str] = ()) -> VarId:
    """Map one identifier token to a variable of ``ctx``."""
    bound = ctx.lag_order if max_order is None else max_order
    m = _IDENT.match(token)
    if m is None:
        raise ValueError(f"malformed identifier {token!r}")
    head, axis, daxis = m.group("head"), m.group("axis"), m.group("daxis")

    def field_and_index(text):
        fieldname, sep, suffix = text.partition("_")
        if fieldname not in ctx.fields:
            raise KeyError(f"unknown identifier {token!r}")
        if sep and not suffix:
            raise ValueError(f"empty derivative suffix in {token!r}")
        index = parse_suffix(suffix, ctx.independents) if suffix else MultiIndex.zero(ctx.m)
        return ctx.field(fieldname), index

    if axis is not None:
        if not allow_momenta:
            raise ValueError(f"momentum token {token!r} not allowed here")
        if not head.startswith("p"):
            raise ValueError(f"momentum token {token!r} must start with 'p'")
        f, index = field_and_index(head[1:])
        if index.order > ctx.k:
            raise ValueError(f"momentum order {index.order} exceeds bound {ctx.k}")
        mom = Mom(f, index, ctx.axis(axis))
        return mom if daxis is None else mom.d(ctx.axis(daxis))
    if head in aux and daxis is None:
        return Aux(head)
    if head in ctx.independents:
        if daxis is not None:
            raise ValueError(f"cannot differentiate independent variable in {token!r}")
        return Indep(ctx.axis(head))
    f, index = field_and_index(head)
    if daxis is not None:
        if not allow_momenta:
            raise ValueError(f"first-jet token {token!r} not allowed here")
        if index.order > ctx.k:
            raise ValueError(f"first-jet base order {index.order} exceeds bound {ctx.k}")
        return JetJ1(f, index, ctx.axis(daxis))
    if index.order > bound:
        raise ValueError(f"jet order {index.order} exceeds bound {bound}")
    return Jet(f, index)


def parse(text: str, ctx: JetContext, allow_momenta: bool = False,
          max_order: int | None = None, aux: Sequence[str] = ()) -> Expr:
    """Parse expression text against ``ctx``.

    Jet tokens may not exceed ``max_order`` (default: the Lagrangian order).
    Momentum and first-jet tokens need ``allow_momenta``.
    """

    def resolve(token):
        return resolve_token(token, ctx, allow_momenta, max_order, aux)

    return _Parser(text, resolve).parse()


# --------------------------------------------------------------------------
# printing


def format_number(c: Fraction) -> str:
    """Exact decimal when the denominator allows it, otherwise ``p/q``."""
    c = Fraction(c)
    if c.denominator == 1:
        return str(c.numerator)
    d = c.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{c.numerator}/{c.denominator}"
    places = max(twos, fives)
    scaled = abs(c.numerator) * 10 ** places // c.denominator
    digits = str(scaled).rjust(places + 1, "0")
    text = digits[:-places] + "." + digits[-places:]
    return ("-" if c < 0 else "") + text


_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, Add):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Const):
        if e.value < 0:
            return _PREC_NEG
        return _PREC_MUL if "/" in format_number(e.value) else _PREC_ATOM
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _is_negative_term(e: Expr) -> bool:
    if isinstance(e, Neg):
        return True
    if isinstance(e, Const):
        return e.value < 0
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        return e.factors[0].value < 0
    return False


def _negated(e: Expr) -> Expr:
    if isinstance(e, Neg):
        return e.arg
    if isinstance(e, Const):
        return Const(-e.value)
    first, rest = e.factors[0], e.factors[1:]
    if first.value == -1:
        return rest[0] if len(rest) == 1 else Mul(rest)
    return Mul((Const(-first.value),) + rest)


def to_text(e: Expr, namer: Callable | None = None) -> str:
    """Render an AST as parseable text without normalizing it."""
    namer = namer or var_name

    def wrap(sub, need):
        s = to_text(sub, namer)
        return f"({s})" if _prec(sub) < need else s

    if isinstance(e, Const):
        return format_number(e.value)
    if isinstance(e, Var):
        return namer(e.var)
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg, namer)})"
    if isinstance(e, Pow):
        return f"{wrap(e.base, _PREC_ATOM)}^{e.exp}"
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, _PREC_MUL)
    if isinstance(e, Div):
        return f"{wrap(e.num, _PREC_MUL)}/{wrap(e.den, _PREC_NEG)}"
    if isinstance(e, Mul):
        factors = list(e.factors)
        prefix = ""
        if isinstance(factors[0], Const) and factors[0].value == -1 and len(factors) > 1:
            prefix = "-"
            factors = factors[1:]
        parts = [wrap(factors[0], _PREC_MUL if prefix else _PREC_NEG)]
        parts += [wrap(f, _PREC_POW if isinstance(f, (Div, Const)) else _PREC_NEG + 1) for f in factors[1:]]
        return prefix + "*".join(parts)
    if isinstance(e, Add):
        out = to_text(e.terms[0], namer)
        if isinstance(e.terms[0], Add):
            out = f"({out})"
        for t in e.terms[1:]:
            if _is_negative_term(t):
                out += " - " + wrap(_negated(t), _PREC_MUL)
            else:
                out += " + " + wrap(t, _PREC_MUL)
        return out
    raise TypeError(f"not an expression node: {e!r}")


def print_canonical(e, ctx: JetContext | None = None, namer: Callable | None = None) -> str:
    """Deterministic text of the normalized expression."""
    if namer is None:
        namer = (lambda v: var_name(v, ctx)) if ctx is not None else var_name
    return to_text(normalize(e), namer)


# --------------------------------------------------------------------------
# compilation for repeated numeric evaluation


def _py_source(e: Expr, slots: Mapping) -> str:
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        try:
            return slots[e.var]
        except KeyError:
            raise EvaluationError(f"no slot for {var_name(e.var)}") from None
    if isinstance(e, Add):
        return "(" + " + ".join(_py_source(t, slots) for t in e.terms) + ")"
    if isinstance(e, Mul):
        return "(" + " * ".join(_py_source(f, slots) for f in e.factors) + ")"
    if isinstance(e, Div):
        return f"({_py_source(e.num, slots)} / {_py_source(e.den, slots)})"
    if isinstance(e, Pow):
        if e.exp < 0:
            return f"(1.0 / {_py_source(e.base, slots)} ** {-e.exp})"
        return f"({_py_source(e.base, slots)} ** {e.exp})"
    if isinstance(e, Func):
        return f"_np.{e.name}({_py_source(e.arg, slots)})"
    if isinstance(e, Neg):
        return f"(-{_py_source(e.arg, slots)})"
    raise TypeError(f"not an expression node: {e!r}")


def lambdify(exprs: Sequence, args: Sequence[VarId]) -> Callable:
    """Compile expressions into ``f(*values) -> list`` with positional variables ``args``.

    Unlike :func:`evaluate` the compiled function does not check domains;
    invalid operations produce inf or nan.
    """
    slots = {v: f"a{i}" for i, v in enumerate(args)}
    body = ", ".join(_py_source(normalize(e), slots) for e in exprs)
    params = ", ".join(slots.values())
    source = f"def _f({params}):\n    return [{body}]\n"
    scope = {"_np": np}
    exec(compile(source, "<lambdify>", "exec"), scope)
    return scope["_f"]
