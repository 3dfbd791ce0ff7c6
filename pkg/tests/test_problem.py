import pytest

from jetvar.problem import (
    BUILTIN_PROBLEMS, ProblemError, builtin_problems, load_problem, load_sections,
    parse_problem, parse_sections,
)

from conftest import FIXTURES

HEADER = "format = jetvar-1\nindependents = t\nfields = q1\norder = 2\n"


def test_builtins_load():
    names = [pb.name for pb in builtin_problems()]
    assert names == list(BUILTIN_PROBLEMS)
    jav = load_problem("javelin")
    assert jav.ctx.fields == ("q1", "q2", "q3") and jav.ctx.k == 1
    assert jav.section is not None and jav.phase_section is not None


def test_load_from_path():
    pb = load_problem(str(FIXTURES / "degenerate.jv"))
    assert pb.name == "degenerate" and pb.section is None


def test_name_defaults_to_stem():
    pb = parse_problem(HEADER + "lagrangian = q1_t^2\n", "some/dir/thing.jv")
    assert pb.name == "thing"


def test_comments_and_blank_lines():
    pb = parse_problem("# heading\n\n" + HEADER + "lagrangian = q1_t^2   # kinetic\n")
    assert str(pb.lagrangian) == "q1_t^2"


@pytest.mark.parametrize("text, fragment", [
    ("independents = t\nfields = q1\norder = 2\nlagrangian = 0\n", "missing 'format"),
    ("format = jetvar-2\nindependents = t\nfields = q1\norder = 2\nlagrangian = 0\n", "unsupported format"),
    (HEADER, "missing key 'lagrangian'"),
    (HEADER + "lagrangian = q1_ttt\n", "exceeds bound"),
    (HEADER + "lagrangian = q1 +\n", "lagrangian"),
    (HEADER + "lagrangian = 0\ncolour = red\n", "unknown key"),
    (HEADER + "lagrangian = 0\nlagrangian = 1\n", "duplicate key"),
    (HEADER.replace("order = 2", "order = two") + "lagrangian = 0\n", "integer"),
    (HEADER.replace("fields = q1", "fields = q1, q1") + "lagrangian = 0\n", "duplicate variable names"),
    (HEADER.replace("fields = q1", "fields = sin") + "lagrangian = 0\n", "function name"),
    (HEADER + "lagrangian = 0\n[extras]\n", "unknown block"),
    (HEADER + "lagrangian = 0\nnonsense\n", "key = value"),
    (HEADER + "lagrangian = 0\n[phase-section]\npq1$t = 0\n", "needs a [section]"),
    (HEADER + "lagrangian = 0\n[section]\nq1 = q1_t\n", "[section]"),
    (HEADER + "lagrangian = 0\n[section]\nq1 = t\n[phase-section]\npq1_tt$t = 0\n", "[phase-section]"),
])
def test_problem_errors(text, fragment):
    with pytest.raises(ProblemError) as info:
        parse_problem(text, "bad.jv")
    assert fragment in str(info.value)


def test_error_carries_line_number():
    with pytest.raises(ProblemError) as info:
        parse_problem(HEADER + "lagrangian = 0\ncolour = red\n", "bad.jv")
    assert info.value.line == 6 and str(info.value).startswith("bad.jv:6:")


def test_sections_file():
    pb = load_problem("javelin")
    s, ps = load_sections("javelin_sine", pb)
    assert ps is None and len(s.exprs) == 3
    _, ps = load_sections(str(FIXTURES / "zero_sections.jv"), load_problem(str(FIXTURES / "zero.jv")))
    assert ps is not None


def test_sections_problem_mismatch():
    pb = load_problem("javelin")
    with pytest.raises(ProblemError, match="for problem 'zero'"):
        load_sections(str(FIXTURES / "zero_sections.jv"), pb)


def test_sections_need_block():
    pb = load_problem("javelin")
    with pytest.raises(ProblemError, match="needs a"):
        parse_sections("format = jetvar-1\n", pb)


def test_missing_file():
    with pytest.raises(ProblemError, match="no such file"):
        load_problem("does-not-exist")
