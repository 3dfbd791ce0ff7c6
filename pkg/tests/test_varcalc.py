import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from jetvar.context import JetContext
from jetvar.exprlang import (
    Mom, equal_numeric, evaluate, is_zero, normalize, parse, print_canonical,
)
from jetvar.jetcalc import SectionSpec, prolong, total_derivative
from jetvar.multiindex import MultiIndex
from jetvar.varcalc import (
    Lagrangian, euler_lagrange, functional_derivative_oracle, momenta_reconstruct,
    partials, raise_order,
)

from strategies import PLANE, polynomials

T1 = JetContext(("t",), ("q1",), 2)
XY = JetContext(("x", "y"), ("u1",), 2)
relaxed = settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])

JAVELIN = Lagrangian.parse(T1, "0.5*(q1_t^2 - q1_tt^2)")
PLATE = Lagrangian.parse(XY, "0.5*(u1_xx + u1_yy)^2")
FREE = Lagrangian.parse(JetContext(("t",), ("q1",), 1), "0.5*q1_t^2")
ZERO = Lagrangian.parse(T1, "0")


def el_text(L):
    return [print_canonical(e, L.ctx) for e in euler_lagrange(L)]


def test_lagrangian_validation():
    with pytest.raises(ValueError):
        Lagrangian.parse(T1, "q1_ttt")
    with pytest.raises(ValueError):
        Lagrangian(T1, parse("pq1$t", T1, allow_momenta=True))


def test_partials():
    assert all(is_zero(e) for e in partials(ZERO).values())
    P = partials(PLATE)
    assert print_canonical(P[(0, MultiIndex((2, 0)))], XY) == "u1_xx + u1_yy"
    assert is_zero(P[(0, MultiIndex((1, 1)))])


def test_euler_lagrange_examples():
    assert el_text(FREE) == ["-q1_tt"]
    assert el_text(JAVELIN) == ["-q1_tt - q1_tttt"]
    assert el_text(PLATE) == ["u1_xxxx + 2*u1_xxyy + u1_yyyy"]
    assert el_text(ZERO) == ["0"]


def test_plate_el_at_quartic_section():
    s = SectionSpec.parse(XY, {"u1": "x^4"})
    (E,) = euler_lagrange(PLATE)
    assert evaluate(E, prolong(s, 4, [1.0, 0.0])) == 24.0


def test_momenta_javelin():
    table = momenta_reconstruct(JAVELIN)
    assert print_canonical(table[Mom(0, MultiIndex((0,)), 0)], T1) == "q1_t + q1_ttt"
    assert print_canonical(table[Mom(0, MultiIndex((1,)), 0)], T1) == "-q1_tt"


def test_momenta_plate_split():
    table = momenta_reconstruct(PLATE)
    m = lambda I, i: print_canonical(table[Mom(0, MultiIndex(I), i)], XY)
    assert m((1, 0), 0) == m((0, 1), 1) == "u1_xx + u1_yy"
    assert m((1, 0), 1) == m((0, 1), 0) == "0"
    assert m((0, 0), 0) == "-u1_xxx - u1_xyy"


def test_momenta_zero():
    assert all(is_zero(e) for e in momenta_reconstruct(ZERO).momenta.values())


@pytest.mark.parametrize("L", [FREE, JAVELIN, PLATE, ZERO])
def test_bottom_residual_is_el(L):
    for b, e in zip(momenta_reconstruct(L).bottom_residual(), euler_lagrange(L)):
        assert normalize(b - e) == normalize(0)


@pytest.mark.parametrize("L", [FREE, JAVELIN, PLATE, ZERO])
def test_order_raising(L):
    raised = raise_order(L)
    assert raised.ctx.lag_order == L.ctx.lag_order + 1
    for e1, e2 in zip(euler_lagrange(raised), euler_lagrange(L)):
        assert equal_numeric(e1, e2, trials=20, tol=1e-9)


CTX_CASES = [
    JetContext(("t",), ("u",), 1),
    JetContext(("t",), ("u",), 2),
    JetContext(("x", "y"), ("u", "w"), 1),
    JetContext(("x", "y"), ("u", "w"), 2),
]


@relaxed
@given(st.sampled_from(CTX_CASES), st.data())
def test_el_annihilates_divergences(ctx, data):
    F = data.draw(polynomials(ctx, order=ctx.k, max_leaves=8))
    axis = data.draw(st.integers(0, ctx.m - 1))
    div = Lagrangian(ctx, total_derivative(F, axis, ctx))
    assert all(is_zero(e) for e in euler_lagrange(div))


@relaxed
@given(polynomials(PLANE, order=2, max_leaves=6), polynomials(PLANE, order=2, max_leaves=6),
       st.integers(-3, 3), st.integers(-3, 3))
def test_el_is_linear(e1, e2, a, b):
    L1, L2 = Lagrangian(PLANE, e1), Lagrangian(PLANE, e2)
    combo = euler_lagrange(Lagrangian(PLANE, a * e1 + b * e2))
    for c, x, y in zip(combo, euler_lagrange(L1), euler_lagrange(L2)):
        assert normalize(c) == normalize(a * x + b * y)


@relaxed
@given(polynomials(PLANE, order=2, max_leaves=8))
def test_bottom_residual_property(e):
    L = Lagrangian(PLANE, e)
    for b, el in zip(momenta_reconstruct(L).bottom_residual(), euler_lagrange(L)):
        assert normalize(b - el) == normalize(0)


# functional derivative oracle ----------------------------------------------

def test_oracle_zero_lagrangian():
    s = SectionSpec.parse(T1, {"q1": "sin(t)"})
    assert functional_derivative_oracle(ZERO, s, [0.5], 0.2)[0] == pytest.approx(0.0, abs=1e-12)


def test_oracle_free_particle():
    s = SectionSpec.parse(FREE.ctx, {"q1": "t^2"})
    val = functional_derivative_oracle(FREE, s, [0.0], 0.2)[0]
    assert abs(val - (-2.0)) <= 0.05 * 2.0


def test_oracle_javelin_cubic():
    s = SectionSpec.parse(T1, {"q1": "t^3"})
    errs = [abs(functional_derivative_oracle(JAVELIN, s, [0.5], w)[0] + 3.0) for w in (0.2, 0.1)]
    assert errs[0] <= 0.05 * 3.0
    assert errs[1] < errs[0]


def test_oracle_converges_monotonically():
    s = SectionSpec.parse(T1, {"q1": "t^6"})
    exact = float(evaluate(euler_lagrange(JAVELIN)[0], prolong(s, 4, [0.5])))
    errs = [abs(functional_derivative_oracle(JAVELIN, s, [0.5], w)[0] - exact) for w in (0.4, 0.2, 0.1)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 0.05 * abs(exact)


def test_oracle_plate():
    s = SectionSpec.parse(XY, {"u1": "x^4*y^2 + x^2*y^4"})
    exact = float(evaluate(euler_lagrange(PLATE)[0], prolong(s, 4, [0.5, 0.5])))
    errs = [abs(functional_derivative_oracle(PLATE, s, [0.5, 0.5], w)[0] - exact) for w in (0.4, 0.2, 0.1)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] <= 0.05 * abs(exact)


def test_oracle_validation():
    s = SectionSpec.parse(T1, {"q1": "t"})
    with pytest.raises(ValueError):
        functional_derivative_oracle(JAVELIN, s, [0.5], 0.0)
    with pytest.raises(ValueError):
        functional_derivative_oracle(JAVELIN, s, [0.5, 0.5], 0.2)
