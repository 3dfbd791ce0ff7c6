"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` or directly with
``python3 tests/test_acceptance.py``.  Each check returns ``(ok, detail)``;
runtime limits are measured on fresh ``jetvar`` processes where a command is
involved.
"""
from __future__ import annotations

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from jetvar.exprlang import Mom, equal_numeric, normalize, parse, print_canonical
from jetvar.jetcalc import SectionSpec
from jetvar.mech import MechState, mech_namer, phase_vector_field, rk4_integrate
from jetvar.multiindex import MultiIndex
from jetvar.problem import builtin_problems, load_problem
from jetvar.triple import legendre_top, phase_system_reduced
from jetvar.varcalc import euler_lagrange, functional_derivative_oracle, momenta_reconstruct, raise_order
from jetvar.verify import reduced_unreduced_gap, verify_problem

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"
FIXTURES = HERE / "fixtures"


def jetvar(*argv) -> tuple[subprocess.CompletedProcess, float]:
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "jetvar.cli", *argv], capture_output=True, text=True)
    return proc, time.perf_counter() - start


def check_javelin_dynamics():
    proc, secs = jetvar("derive", "phase", "javelin", "--mech")
    # v = q', p' = 0, p + r' = v, r = -v' for each of the three axes
    display = "".join(f"v{i} = q{i}'\np{i}' = 0\np{i} + r{i}' = v{i}\nr{i} = -v{i}'\n" for i in (1, 2, 3))
    golden = (GOLDEN / "javelin_phase_mech.txt").read_text()
    ok = proc.returncode == 0 and proc.stdout == golden == display and secs < 1.0
    return ok, f"byte-exact={proc.stdout == golden == display}, {secs:.2f} s"


def check_javelin_hamiltonian():
    proc, secs = jetvar("derive", "hamiltonian", "javelin")
    ctx = load_problem("javelin").ctx
    H = parse(proc.stdout.strip().removeprefix("H = "), ctx, allow_momenta=True)
    display = parse(
        " + ".join(f"pq{i}$t*q{i}_t" for i in (1, 2, 3))
        + " - 0.5*(" + " + ".join(f"pq{i}_t$t^2 + q{i}_t^2" for i in (1, 2, 3)) + ")",
        ctx, allow_momenta=True)
    same = normalize(H - display) == normalize(0)
    return proc.returncode == 0 and same and secs < 1.0, f"normalize-equal={same}, {secs:.2f} s"


def check_plate_phase():
    proc, secs = jetvar("derive", "phase", "plate")
    golden = (GOLDEN / "plate_phase.txt").read_text()
    # p^11 = dL/du_(2,0), p^22 = dL/du_(0,2), p^12 + p^21 = dL/du_(1,1) for L = (u_xx + u_yy)^2 / 2
    wanted = [
        "TOP | u1 | (2,0) | pu1_x$x = u1_xx + u1_yy",
        "TOP | u1 | (1,1) | pu1_x$y + pu1_y$x = 0",
        "TOP | u1 | (0,2) | pu1_y$y = u1_xx + u1_yy",
    ]
    tops = [l for l in proc.stdout.splitlines() if l.startswith("TOP")]
    ok = proc.returncode == 0 and proc.stdout == golden and tops == wanted and secs < 1.0
    return ok, f"golden={proc.stdout == golden}, top lines={tops == wanted}, {secs:.2f} s"


def check_el_oracle():
    start = time.perf_counter()
    pb = load_problem("javelin")
    L = pb.lagrangian
    s = SectionSpec.parse(pb.ctx, {f: "t^3" for f in pb.ctx.fields})
    exact = -3.0
    errs = {w: float(np.max(np.abs(functional_derivative_oracle(L, s, [0.5], w) - exact))) for w in (0.2, 0.1)}
    secs = time.perf_counter() - start
    ok = errs[0.2] <= 0.05 * abs(exact) and errs[0.1] < errs[0.2] and secs < 30
    return ok, f"|err| {errs[0.2]:.2e} at 0.2, {errs[0.1]:.2e} at 0.1, {secs:.2f} s"


def check_momenta_identity():
    start = time.perf_counter()
    bad = []
    for pb in builtin_problems():
        for b, e in zip(momenta_reconstruct(pb.lagrangian).bottom_residual(), euler_lagrange(pb.lagrangian)):
            if normalize(b - e) != normalize(0):
                bad.append(pb.name)
    secs = time.perf_counter() - start
    return not bad and secs < 5, f"mismatches {bad or 'none'}, {secs:.2f} s"


def check_reduced_unreduced():
    gaps = {pb.name: reduced_unreduced_gap(pb.lagrangian, samples=50) for pb in builtin_problems()}
    worst = max(gaps.values())
    return worst <= 1e-12, f"max gap {worst:.2e} over 50 points per fixture"


def check_order_raising():
    worst, ok = 0.0, True
    for pb in builtin_problems():
        for e1, e2 in zip(euler_lagrange(raise_order(pb.lagrangian)), euler_lagrange(pb.lagrangian)):
            rep = equal_numeric(e1, e2, trials=20, tol=1e-9)
            ok = ok and bool(rep)
            worst = max(worst, rep.max_error)
    return ok, f"max error {worst:.2e}"


def check_simulation():
    proc, secs = jetvar("simulate", "javelin", "--init", "0,1,0,0", "--dt", "1e-3", "--t-end", repr(math.pi))
    rows = [[float(x) for x in line.split(",")] for line in proc.stdout.splitlines()[1:]]
    t = np.array([r[0] for r in rows])
    q = np.array([[r[1], r[3], r[5]] for r in rows])
    H = np.array([r[-1] for r in rows])
    q_end = float(np.max(np.abs(q[-1])))
    err = float(np.max(np.abs(q - np.sin(t)[:, None])))
    drift = float(np.max(np.abs(H - H[0])))
    ok = proc.returncode == 0 and t[-1] == math.pi and q_end <= 1e-6 and err <= 1e-6 and drift <= 1e-8 and secs < 10
    return ok, f"|q(pi)| {q_end:.1e}, max |q - sin t| {err:.1e}, H drift {drift:.1e}, {secs:.2f} s"


def check_first_order():
    notes = []
    # Legendre coordinates p^j = dL/du_j from the top equations at k = 0
    field = load_problem(str(FIXTURES / "first_order_field.jv"))
    tops = {e.index: e for e in phase_system_reduced(field.lagrangian).family("TOP")}
    ctx = field.ctx
    legendre_ok = all(
        normalize(tops[MultiIndex.unit(2, j)].lhs - parse(f"pu${ctx.independents[j]}", ctx, allow_momenta=True)) == normalize(0)
        and tops[MultiIndex.unit(2, j)].rhs == legendre_top(field.lagrangian)[(0, MultiIndex.unit(2, j))]
        for j in range(2)
    )
    notes.append(f"p^j = dL/du_j {legendre_ok}")
    # harmonic oscillator: q' = p, p' = -q
    osc = load_problem("harmonic_oscillator")
    X = phase_vector_field(osc.lagrangian)
    namer = mech_namer(osc.ctx)
    rates = [print_canonical(e, namer=namer) for e in X.exprs]
    hamilton_ok = rates == ["p1", "-q1"]
    traj = rk4_integrate(X, MechState.from_per_field([1.0, 0.0], osc.ctx), 1e-3, 1.0)
    flow_ok = abs(traj.series(0, 0)[-1] - math.cos(1.0)) <= 1e-9
    notes.append(f"q' = p, p' = -q {hamilton_ok and flow_ok}")
    mom = momenta_reconstruct(osc.lagrangian)[Mom(0, MultiIndex((0,)), 0)]
    momentum_ok = mom == normalize(parse("q1_t", osc.ctx))
    notes.append(f"p = q' {momentum_ok}")
    return legendre_ok and hamilton_ok and flow_ok and momentum_ok, ", ".join(notes)


def check_negative_control():
    res = verify_problem(load_problem(str(FIXTURES / "javelin_flipped.jv")))
    failed = [o.prop for o in res if o.status == "FAIL"]
    proc, _ = jetvar("verify", str(FIXTURES / "javelin_flipped.jv"))
    named = "momenta-reconstruction\tFAIL" in proc.stdout
    return failed == ["momenta-reconstruction"] and proc.returncode == 1 and named, f"failed {failed}, exit {proc.returncode}"


CRITERIA = [
    (1, "javelin phase dynamics in mechanics notation", check_javelin_dynamics),
    (2, "javelin Hamiltonian", check_javelin_hamiltonian),
    (3, "plate phase equations", check_plate_phase),
    (4, "Euler-Lagrange value against the quadrature oracle", check_el_oracle),
    (5, "bottom momenta residual equals Euler-Lagrange", check_momenta_identity),
    (6, "reduced and unreduced systems agree", check_reduced_unreduced),
    (7, "order raising leaves Euler-Lagrange unchanged", check_order_raising),
    (8, "javelin simulation", check_simulation),
    (9, "first-order regression", check_first_order),
    (10, "negative control fails verification", check_negative_control),
]


def report_line(number, title, ok, detail) -> str:
    return f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"


@pytest.mark.parametrize("number, title, check", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + report_line(number, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = [(n, t, *c()) for n, t, c in CRITERIA]
    for row in results:
        print(report_line(*row))
    sys.exit(0 if all(r[2] for r in results) else 1)
