"""Problem and section files (format tag ``jetvar-1``) and the builtin registry.

A problem file is a list of ``key = value`` lines followed by optional
blocks::

    format = jetvar-1
    name = javelin
    independents = t
    fields = q1, q2, q3
    order = 2
    lagrangian = 0.5*(q1_t^2 - q1_tt^2)

    [section]
    q1 = sin(t)

    [phase-section]
    pq1_t$t = sin(t)
    pq1$t = 0

A section file has the same blocks after a header naming its problem
(``problem = javelin``); a problem file can stand in for its own section file.  Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .context import JetContext
from .exprlang import ParseError
from .jetcalc import PhaseSectionSpec, SectionSpec
from .varcalc import Lagrangian

FORMAT_TAG = "jetvar-1"
FIXTURE_SUFFIX = ".jv"
BUILTIN_PROBLEMS = ("javelin", "free_particle", "harmonic_oscillator", "plate")


class ProblemError(ValueError):
    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass
class Problem:
    name: str
    ctx: JetContext
    lagrangian: Lagrangian
    section: SectionSpec | None = None
    phase_section: PhaseSectionSpec | None = None
    source: str | None = None


def _split(text: str, source: str | None):
    """Header pairs and blocks, each a list of (line number, key, value)."""
    header, blocks, current = [], {}, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in ("section", "phase-section"):
                raise ProblemError(f"unknown block [{current}]", source, lineno)
            if current in blocks:
                raise ProblemError(f"duplicate block [{current}]", source, lineno)
            blocks[current] = []
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ProblemError(f"expected 'key = value', got {line!r}", source, lineno)
        entry = (lineno, key.strip(), value.strip())
        if current is None:
            header.append(entry)
        else:
            blocks[current].append(entry)
    return header, blocks


def _header_dict(header, allowed, source) -> dict:
    out = {}
    for lineno, key, value in header:
        if key not in allowed:
            raise ProblemError(f"unknown key {key!r}", source, lineno)
        if key in out:
            raise ProblemError(f"duplicate key {key!r}", source, lineno)
        out[key] = (lineno, value)
    if "format" not in out:
        raise ProblemError(f"missing 'format = {FORMAT_TAG}' line", source)
    if out["format"][1] != FORMAT_TAG:
        raise ProblemError(f"unsupported format {out['format'][1]!r}", source, out["format"][0])
    return out


def _names(value: str) -> tuple:
    return tuple(n.strip() for n in value.split(",") if n.strip())


def _blocks(ctx: JetContext, blocks: dict, source):
    section = phase = None
    if "section" in blocks:
        texts = {}
        for lineno, key, value in blocks["section"]:
            if key in texts:
                raise ProblemError(f"duplicate section entry {key!r}", source, lineno)
            texts[key] = value
        try:
            section = SectionSpec.parse(ctx, texts)
        except (ParseError, ValueError, KeyError) as exc:
            raise ProblemError(f"[section]: {exc}", source) from None
    if "phase-section" in blocks:
        if section is None:
            raise ProblemError("[phase-section] needs a [section] block", source)
        texts = {}
        for lineno, key, value in blocks["phase-section"]:
            if key in texts:
                raise ProblemError(f"duplicate phase-section entry {key!r}", source, lineno)
            texts[key] = value
        try:
            phase = PhaseSectionSpec.parse(ctx, texts, fill_zero=True)
        except (ParseError, ValueError, KeyError) as exc:
            raise ProblemError(f"[phase-section]: {exc}", source) from None
    return section, phase


def parse_problem(text: str, source: str | None = None) -> Problem:
    header, blocks = _split(text, source)
    keys = _header_dict(header, {"format", "name", "independents", "fields", "order", "lagrangian"}, source)
    for required in ("independents", "fields", "order", "lagrangian"):
        if required not in keys:
            raise ProblemError(f"missing key {required!r}", source)
    lineno, order_text = keys["order"]
    try:
        order = int(order_text)
    except ValueError:
        raise ProblemError(f"order must be an integer, got {order_text!r}", source, lineno) from None
    try:
        ctx = JetContext(_names(keys["independents"][1]), _names(keys["fields"][1]), order)
    except (ValueError, KeyError) as exc:
        raise ProblemError(str(exc), source) from None
    lineno, lag_text = keys["lagrangian"]
    try:
        lagrangian = Lagrangian.parse(ctx, lag_text)
    except ParseError as exc:
        raise ProblemError(f"lagrangian: {exc}", source, lineno) from None
    except (ValueError, KeyError) as exc:
        raise ProblemError(f"lagrangian: {exc}", source, lineno) from None
    name = keys["name"][1] if "name" in keys else (Path(source).stem if source else "problem")
    section, phase = _blocks(ctx, blocks, source)
    return Problem(name, ctx, lagrangian, section, phase, source)


def parse_sections(text: str, problem: Problem, source: str | None = None):
    """Read a section file for ``problem``; returns (section, phase section or None).

    A problem file with the same name also works: its own blocks are used.
    """
    header, blocks = _split(text, source)
    if any(key == "lagrangian" for _, key, _ in header):
        other = parse_problem(text, source)
        if other.name != problem.name:
            raise ProblemError(f"problem file {other.name!r} does not match {problem.name!r}", source)
        if other.section is None:
            raise ProblemError("problem file has no [section] block", source)
        return other.section, other.phase_section
    keys = _header_dict(header, {"format", "problem"}, source)
    if "problem" in keys and keys["problem"][1] != problem.name:
        raise ProblemError(
            f"section file is for problem {keys['problem'][1]!r}, not {problem.name!r}",
            source, keys["problem"][0],
        )
    if "section" not in blocks:
        raise ProblemError("section file needs a [section] block", source)
    return _blocks(problem.ctx, blocks, source)


def _fixture_text(name: str) -> str | None:
    res = resources.files("jetvar") / "fixtures" / (name + FIXTURE_SUFFIX)
    if res.is_file():
        return res.read_text()
    return None


def _resolve(arg: str) -> tuple[str, str]:
    path = Path(arg)
    if path.is_file():
        return path.read_text(), str(path)
    text = _fixture_text(arg)
    if text is None:
        raise ProblemError(f"no such file or builtin fixture: {arg!r}")
    return text, f"<builtin {arg}>"


def load_problem(arg: str) -> Problem:
    """Load a problem from a path or a builtin fixture name."""
    text, source = _resolve(arg)
    return parse_problem(text, source)


def load_sections(arg: str, problem: Problem):
    text, source = _resolve(arg)
    return parse_sections(text, problem, source)


def builtin_problems() -> list[Problem]:
    return [load_problem(name) for name in BUILTIN_PROBLEMS]
