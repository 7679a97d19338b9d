"""Univariate symbolic basis functions and their evaluation.

Each basis function has the closed form  x^p * exp(arg)  where arg is one of
nothing, x, -x, 1/x, -1/x, applied to a designated input coordinate.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError

#: Hard guard around the 1/x singularity; inputs with |coordinate| below this
#: are rejected rather than silently saturated.
X_GUARD = 1e-6

_EXP_ARGS = ("", "x", "-x", "1/x", "-1/x")


@dataclass(frozen=True)
class BasisFunction:
    """One symbolic form x^p * exp(arg) read from a single input coordinate."""

    id: int
    power: int
    exp_arg: str = ""
    coordinate: int = 0

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("power must be a nonnegative integer")
        if self.exp_arg not in _EXP_ARGS:
            raise ValueError(f"unknown exponential argument {self.exp_arg!r}")

    @property
    def needs_guard(self) -> bool:
        return self.exp_arg in ("1/x", "-1/x")

    @property
    def form(self) -> str:
        """Textual form, e.g. '1', 'x^2*exp(x)', 'exp(-1/x)'."""
        if self.power == 0:
            poly = "" if self.exp_arg else "1"
        elif self.power == 1:
            poly = "x"
        else:
            poly = f"x^{self.power}"
        if self.exp_arg:
            expo = f"exp({self.exp_arg})"
            text = f"{poly}*{expo}" if poly else expo
        else:
            text = poly
        if self.coordinate != 0:
            text = f"{text}@{self.coordinate}"
        return text

    def __call__(self, x) -> float:
        v = float(np.asarray(x).reshape(-1)[self.coordinate])
        if self.needs_guard and abs(v) < X_GUARD:
            raise DomainError(
                f"basis form {self.form!r} undefined for |x| < {X_GUARD:g} (got {v!r})"
            )
        if self.exp_arg == "":
            e = 1.0
        elif self.exp_arg == "x":
            e = math.exp(v)
        elif self.exp_arg == "-x":
            e = math.exp(-v)
        elif self.exp_arg == "1/x":
            e = math.exp(1.0 / v)
        else:
            e = math.exp(-1.0 / v)
        return v**self.power * e


_FORM_RE = re.compile(
    r"^(?:(?P<poly>1|x(?:\^(?P<pow>\d+))?)\*?)?"
    r"(?:exp\((?P<arg>-?x|-?1/x)\))?"
    r"(?:@(?P<coord>\d+))?$"
)


def parse_form(text: str) -> BasisFunction:
    """Parse a textual form like 'x^2*exp(x)' back into a BasisFunction (id 0)."""
    m = _FORM_RE.match(text.strip())
    if not m or (m.group("poly") is None and m.group("arg") is None):
        raise ParseError(f"unrecognized basis form {text!r}")
    poly = m.group("poly")
    if poly is None or poly == "1":
        power = 0
    elif poly == "x":
        power = 1
    else:
        power = int(m.group("pow"))
    arg = m.group("arg") or ""
    coord = int(m.group("coord") or 0)
    return BasisFunction(id=0, power=power, exp_arg=arg, coordinate=coord)


@dataclass(frozen=True)
class BasisSet:
    """Ordered collection of basis functions with ids 1..N_K."""

    functions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        ids = [f.id for f in self.functions]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("basis function ids must be 1..N_K with no gaps")

    @property
    def size(self) -> int:
        return len(self.functions)

    @property
    def forms(self) -> list:
        return [f.form for f in self.functions]


def basis_from_forms(forms) -> BasisSet:
    """Build a BasisSet from textual forms, assigning ids in order."""
    funcs = []
    for i, text in enumerate(forms, start=1):
        proto = parse_form(text)
        funcs.append(
            BasisFunction(id=i, power=proto.power, exp_arg=proto.exp_arg,
                          coordinate=proto.coordinate)
        )
    return BasisSet(functions=tuple(funcs))


def canonical_basis() -> BasisSet:
    """The 19-function set used throughout the reactor case study.

    Order: 1, x, x^2, x^3, x^4, x^5, exp(x), x*exp(x), x^2*exp(x), x^3*exp(x),
    exp(-x), x*exp(-x), x^2*exp(-x), x^3*exp(-x), x*exp(1/x), x^2*exp(1/x),
    x^3*exp(1/x), exp(-1/x), x*exp(-1/x).
    """
    specs = [
        (0, ""), (1, ""), (2, ""), (3, ""), (4, ""), (5, ""),
        (0, "x"), (1, "x"), (2, "x"), (3, "x"),
        (0, "-x"), (1, "-x"), (2, "-x"), (3, "-x"),
        (1, "1/x"), (2, "1/x"), (3, "1/x"),
        (0, "-1/x"), (1, "-1/x"),
    ]
    funcs = tuple(
        BasisFunction(id=i, power=p, exp_arg=arg)
        for i, (p, arg) in enumerate(specs, start=1)
    )
    return BasisSet(functions=funcs)


def evaluate_basis(bs: BasisSet, x) -> np.ndarray:
    """Evaluate every basis function at input x; returns a length-N_K vector."""
    out = np.array([f(x) for f in bs.functions], dtype=float)
    if not np.all(np.isfinite(out)):
        bad = bs.functions[int(np.argmax(~np.isfinite(out)))]
        raise DomainError(f"basis form {bad.form!r} overflowed at x={x!r}")
    return out


def evaluate_basis_matrix(bs: BasisSet, X) -> np.ndarray:
    """Evaluate the basis on each row of X; returns an N_pts x N_K matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([evaluate_basis(bs, row) for row in X])
