"""Symmetric multiindices labelling jet coordinates and momenta.

A multiindex over ``m`` independent variables is a tuple of ``m`` non-negative
derivative counts.  Axes are 0-based throughout the package.
"""
from __future__ import annotations

from itertools import combinations_with_replacement
from typing import Iterable, Sequence


class MultiIndex(tuple):
    """Immutable per-axis derivative counts, e.g. ``MultiIndex((2, 1))`` is d^3/dx^2 dy."""

    __slots__ = ()

    def __new__(cls, entries: Iterable[int] = ()):
        entries = tuple(int(e) for e in entries)
        if not entries:
            raise ValueError("a multiindex needs at least one axis")
        if any(e < 0 for e in entries):
            raise ValueError(f"negative multiindex entry in {entries}")
        return super().__new__(cls, entries)

    @classmethod
    def zero(cls, m: int) -> MultiIndex:
        return cls((0,) * m)

    @classmethod
    def unit(cls, m: int, axis: int) -> MultiIndex:
        return cls.zero(m).bump(axis)

    @property
    def m(self) -> int:
        return len(self)

    @property
    def order(self) -> int:
        return sum(self)

    def bump(self, axis: int) -> MultiIndex:
        """Return ``I + axis``."""
        _check_axis(axis, len(self))
        entries = list(self)
        entries[axis] += 1
        return MultiIndex(entries)

    def sort_key(self) -> tuple:
        # degree first, then (1,0) before (0,1)
        return (sum(self), tuple(-e for e in self))

    def suffix(self, names: Sequence[str]) -> str:
        """Derivative suffix, e.g. (2,1) over ("x","y") -> "xxy"."""
        if len(names) != len(self):
            raise ValueError("name count does not match multiindex length")
        return "".join(name * e for name, e in zip(names, self))

    def __repr__(self) -> str:
        return "(" + ",".join(str(e) for e in self) + ")"

    __str__ = __repr__


def _check_axis(axis: int, m: int) -> None:
    if not 0 <= axis < m:
        raise IndexError(f"axis {axis} out of range for {m} independent variables")


def order(index: Sequence[int]) -> int:
    return sum(index)


def bump(index: Sequence[int], axis: int) -> MultiIndex:
    return MultiIndex(index).bump(axis)


def delta(index: Sequence[int], lower: Sequence[int], axis: int) -> int:
    """Kronecker-like symbol: 1 iff ``index == lower + axis``."""
    if len(index) != len(lower):
        raise ValueError("multiindices of different lengths")
    if not 0 <= axis < len(lower):
        return 0
    return int(tuple(index) == tuple(MultiIndex(lower).bump(axis)))


def decompositions(index: Sequence[int]) -> list[tuple[MultiIndex, int]]:
    """All ``(J, i)`` with ``J + i == index``, ordered by axis."""
    out = []
    for axis, e in enumerate(index):
        if e > 0:
            entries = list(index)
            entries[axis] -= 1
            out.append((MultiIndex(entries), axis))
    return out


def of_order(m: int, k: int) -> list[MultiIndex]:
    """Multiindices with ``|I| == k`` in degree-then-lex order."""
    if m < 1 or k < 0:
        raise ValueError("need m >= 1 and k >= 0")
    out = []
    for combo in combinations_with_replacement(range(m), k):
        entries = [0] * m
        for axis in combo:
            entries[axis] += 1
        out.append(MultiIndex(entries))
    out.sort(key=MultiIndex.sort_key)
    return out


def enumerate_upto(m: int, k: int) -> list[MultiIndex]:
    """All multiindices with ``|I| <= k``; there are C(m+k, m) of them."""
    out = []
    for d in range(k + 1):
        out.extend(of_order(m, d))
    return out


def parse_suffix(suffix: str, names: Sequence[str]) -> MultiIndex:
    """Split a derivative suffix into independent-variable names.

    Repeated or permuted names canonicalize to the same multiindex.  Raises
    ``ValueError`` when the suffix cannot be split, or splits in two ways that
    disagree.
    """
    found: set[MultiIndex] = set()
    counts = [0] * len(names)

    def walk(pos: int) -> None:
        if pos == len(suffix):
            found.add(MultiIndex(counts))
            return
        for axis, name in enumerate(names):
            if suffix.startswith(name, pos):
                counts[axis] += 1
                walk(pos + len(name))
                counts[axis] -= 1

    walk(0)
    if not found:
        raise ValueError(f"cannot read derivative suffix {suffix!r} over {tuple(names)}")
    if len(found) > 1:
        raise ValueError(f"ambiguous derivative suffix {suffix!r} over {tuple(names)}")
    return found.pop()
