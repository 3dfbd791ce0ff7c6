import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from jetvar.context import JetContext
from jetvar.exprlang import (
    Jet, Mom, diff, evaluate, normalize, parse, print_canonical,
)
from jetvar.jetcalc import (
    J1JkPoint, PhaseSectionSpec, SectionSpec, holonomy_residuals, prolong,
    total_derivative, total_derivative_multi,
)
from jetvar.multiindex import MultiIndex, enumerate_upto

from strategies import PLANE, polynomials

T1 = JetContext(("t",), ("q1",), 2)
XY = JetContext(("x", "y"), ("u1",), 2)
relaxed = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def jet(field, *index):
    return Jet(field, MultiIndex(index))


def text(e, ctx):
    return print_canonical(e, ctx)


def test_total_derivative_examples():
    assert text(total_derivative(parse("q1_t", T1), 0, T1), T1) == "q1_tt"
    ctx = JetContext(("x1", "x2"), ("u1",), 1)
    out = total_derivative(parse("u1*x1", ctx), 0, ctx)
    assert normalize(out) == normalize(parse("u1 + x1*u1_x1", ctx))


def test_total_derivative_of_javelin_momentum():
    L = parse("0.5*(q1_t^2 - q1_tt^2)", T1)
    out = total_derivative(diff(L, jet(0, 2)), 0, T1)
    assert text(out, T1) == "-q1_ttt"


def test_total_derivative_rejects_phase_variables():
    e = parse("pq1$t", T1, allow_momenta=True)
    with pytest.raises(ValueError):
        total_derivative(e, 0, T1)


def test_total_derivative_multi():
    e = parse("q1*t", T1)
    assert total_derivative_multi(e, (0,), T1) == normalize(e)
    assert text(total_derivative_multi(parse("q1", T1), (2,), T1), T1) == "q1_tt"
    u = parse("u1", XY)
    both = total_derivative_multi(u, (1, 1), XY)
    assert text(both, XY) == "u1_xy"
    assert both == total_derivative(total_derivative(u, 1, XY), 0, XY)


def test_prolong_examples():
    s = SectionSpec.parse(T1, {"q1": "sin(t)"})
    v = prolong(s, 2, [0.0])
    assert v[jet(0, 0)] == 0.0 and v[jet(0, 1)] == 1.0 and v[jet(0, 2)] == 0.0
    p = SectionSpec.parse(XY, {"u1": "x^4"})
    w = prolong(p, 4, [1.0, 0.0])
    assert w[jet(0, 4, 0)] == 24.0 and w[jet(0, 2, 2)] == 0.0


def test_prolong_arrays():
    s = SectionSpec.parse(T1, {"q1": "t^2"})
    v = prolong(s, 2, [np.array([0.0, 1.0, 2.0])])
    assert np.allclose(v[jet(0, 1)], [0, 2, 4])
    assert np.allclose(v[jet(0, 2)], [2, 2, 2])


def test_section_validation():
    with pytest.raises(ValueError):
        SectionSpec.parse(T1, {})
    with pytest.raises(ValueError):
        SectionSpec.parse(T1, {"q1": "t", "q2": "t"})
    with pytest.raises(ValueError):
        SectionSpec(T1, [parse("q1", T1)])


def test_phase_section_validation():
    with pytest.raises(ValueError):
        PhaseSectionSpec.parse(T1, {"pq1$t": "t"})
    ps = PhaseSectionSpec.parse(T1, {"pq1$t": "t"}, fill_zero=True)
    sub = ps.substitution()
    assert sub[Mom(0, MultiIndex((0,)), 0).d(0)] == normalize(1)
    with pytest.raises(ValueError):
        PhaseSectionSpec.parse(T1, {"q1": "t"})


SECTIONS = ["x^3*y - 2*x*y^2", "sin(x)*cos(y)", "exp(x - y) + x*y", "x^4 + y^4"]


@relaxed
@given(polynomials(PLANE, order=1, max_leaves=8), st.sampled_from(SECTIONS), st.sampled_from(SECTIONS),
       st.integers(0, 1), st.integers(0, 2 ** 32 - 1))
def test_prolong_chain_rule(e, f1, f2, axis, seed):
    s = SectionSpec.parse(PLANE, {"u": f1, "w": f2})
    x = np.random.default_rng(seed).uniform(-0.8, 0.8, 2)
    h = 1e-5
    exact = float(evaluate(total_derivative(e, axis, PLANE), prolong(s, 2, list(x))))
    up, down = x.copy(), x.copy()
    up[axis] += h
    down[axis] -= h
    fd = (float(evaluate(e, prolong(s, 1, list(up)))) - float(evaluate(e, prolong(s, 1, list(down))))) / (2 * h)
    scale = 1 + abs(exact) + abs(float(evaluate(e, prolong(s, 1, list(x)))))
    assert abs(exact - fd) <= 1e-6 * scale


@relaxed
@given(polynomials(PLANE, order=2, max_leaves=8))
def test_total_derivatives_commute(e):
    a = total_derivative(total_derivative(e, 0, PLANE), 1, PLANE)
    b = total_derivative(total_derivative(e, 1, PLANE), 0, PLANE)
    assert normalize(a - b) == normalize(0)


@relaxed
@given(polynomials(PLANE, max_leaves=6), polynomials(PLANE, max_leaves=6), st.integers(0, 1))
def test_leibniz(e1, e2, axis):
    lhs = total_derivative(e1 * e2, axis, PLANE)
    rhs = total_derivative(e1, axis, PLANE) * e2 + e1 * total_derivative(e2, axis, PLANE)
    assert normalize(lhs) == normalize(rhs)


def test_holonomy_from_section_is_zero():
    s = SectionSpec.parse(XY, {"u1": "x^2*y + sin(y)"})
    w = J1JkPoint.from_section(s, (0.3, 0.7))
    assert all(abs(r) < 1e-12 for _, r in holonomy_residuals(w))


def test_holonomy_mechanics_residual():
    ctx = JetContext(("t",), ("u",), 2)          # k = 1
    u = {(0, (0,)): 0.0, (0, (1,)): 3.0}
    u1 = {(0, (0,), 0): 5.0, (0, (1,), 0): 0.0}
    res = dict(holonomy_residuals(J1JkPoint(ctx, (0.0,), u, u1)))
    assert res["H u;t - u_t"] == 2.0


def test_holonomy_symmetry_residual():
    ctx = JetContext(("x", "y"), ("u",), 2)      # k = 1, m = 2
    u = {(0, I): 0.0 for I in enumerate_upto(2, 1)}
    u1 = {(0, I, i): 0.0 for I in enumerate_upto(2, 1) for i in range(2)}
    u1[(0, (1, 0), 1)] = 1.0
    u1[(0, (0, 1), 0)] = 0.0
    res = [r for name, r in holonomy_residuals(J1JkPoint(ctx, (0.0, 0.0), u, u1)) if name.startswith("SYM")]
    assert [abs(r) for r in res] == [1.0]


def test_point_validation():
    with pytest.raises(ValueError):
        J1JkPoint(T1, (0.0,), {}, {})
