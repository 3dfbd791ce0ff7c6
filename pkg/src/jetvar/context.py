from __future__ import annotations

import re
from dataclasses import dataclass, replace

_NAME = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")
_RESERVED = {"sin", "cos", "exp", "log", "sqrt"}


@dataclass(frozen=True)
class JetContext:
    """Problem signature: independent names, field names and Lagrangian order k+1.

    Names are alphanumeric and start with a letter; the underscore, ``$`` and
    ``;`` are reserved for jet and momentum tokens.
    """

    independents: tuple[str, ...]
    fields: tuple[str, ...]
    lag_order: int = 1

    def __post_init__(self):
        object.__setattr__(self, "independents", tuple(self.independents))
        object.__setattr__(self, "fields", tuple(self.fields))
        if not self.independents:
            raise ValueError("need at least one independent variable")
        if not self.fields:
            raise ValueError("need at least one field")
        if self.lag_order < 1:
            raise ValueError("Lagrangian order must be >= 1")
        names = self.independents + self.fields
        for name in names:
            if not _NAME.match(name):
                raise ValueError(f"invalid variable name {name!r}")
            if name in _RESERVED:
                raise ValueError(f"{name!r} is a function name")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")

    @property
    def m(self) -> int:
        return len(self.independents)

    @property
    def n(self) -> int:
        return len(self.fields)

    @property
    def k(self) -> int:
        """Order of the jet bundle ``J^k`` carrying momenta (Lagrangian order minus one)."""
        return self.lag_order - 1

    def raised(self, by: int = 1) -> JetContext:
        return replace(self, lag_order=self.lag_order + by)

    def axis(self, name: str) -> int:
        try:
            return self.independents.index(name)
        except ValueError:
            raise KeyError(f"unknown independent variable {name!r}") from None

    def field(self, name: str) -> int:
        try:
            return self.fields.index(name)
        except ValueError:
            raise KeyError(f"unknown field {name!r}") from None
