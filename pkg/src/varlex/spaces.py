"""Measure spaces with piecewise-constant variable exponents.

A space is a finite list of cells (weighted atoms, or diffuse blocks carrying a
constant exponent) plus an optional countable tail of unit-weight atoms whose
exponents are produced by a generator. Exponents are exact: finite values are
stored as rationals and infinity is a separate state, so conjugation is an
exact involution.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache, total_ordering
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "Exponent",
    "INF",
    "ONE",
    "TWO",
    "CellKind",
    "Cell",
    "TailDirection",
    "TailSpec",
    "SpaceSpec",
    "ExponentSummary",
    "IntervalIpq",
    "as_exponent",
    "summarize",
    "conjugate",
    "conjugate_space",
    "interval_Ipq",
    "interval_contains",
    "truncate",
    "space_to_dict",
    "space_from_dict",
]


@total_ordering
class Exponent:
    """A value in [1, inf].

    Finite values are kept as :class:`fractions.Fraction`; infinity is the state
    ``_frac is None``. Floats are converted exactly (their binary value), strings
    accept ``"inf"``, rationals ``"a/b"`` and decimal literals (parsed as floats
    so that ``Exponent("1.1") == Exponent(1.1)``).
    """

    __slots__ = ("_frac",)

    def __init__(self, value):
        if isinstance(value, Exponent):
            frac = value._frac
        elif isinstance(value, str):
            frac = _parse_exponent_str(value)
        elif isinstance(value, Fraction):
            frac = value
        elif isinstance(value, (int, np.integer)):
            frac = Fraction(int(value))
        else:
            x = float(value)
            if math.isnan(x):
                raise ValidationError("exponent must not be NaN")
            frac = None if x == math.inf else Fraction(x)
        if frac is not None and frac < 1:
            raise ValidationError(f"exponent must be >= 1, got {float(frac)!r}")
        object.__setattr__(self, "_frac", frac)

    def __setattr__(self, name, value):
        raise AttributeError("Exponent is immutable")

    @property
    def is_infinite(self) -> bool:
        return self._frac is None

    @property
    def fraction(self) -> Fraction:
        if self._frac is None:
            raise ValueError("infinite exponent has no rational value")
        return self._frac

    def conjugate(self) -> "Exponent":
        if self._frac is None:
            return ONE
        if self._frac == 1:
            return INF
        return Exponent(self._frac / (self._frac - 1))

    def __float__(self) -> float:
        return math.inf if self._frac is None else float(self._frac)

    def _key(self):
        return (1, 0) if self._frac is None else (0, self._frac)

    def __eq__(self, other):
        if isinstance(other, Exponent):
            return self._frac == other._frac
        try:
            other = as_exponent(other)
        except (ValidationError, TypeError, ValueError):
            return NotImplemented
        return self._frac == other._frac

    def __lt__(self, other):
        if not isinstance(other, Exponent):
            other = as_exponent(other)
        a, b = self._frac, other._frac
        if a is None:
            return False
        return b is None or a < b

    def __gt__(self, other):
        if not isinstance(other, Exponent):
            other = as_exponent(other)
        return other.__lt__(self)

    def __le__(self, other):
        return not self.__gt__(other)

    def __ge__(self, other):
        return not self.__lt__(other)

    def __hash__(self):
        return hash(math.inf) if self._frac is None else hash(self._frac)

    def __repr__(self):
        return f"Exponent({format_exponent(self)!r})"

    def __str__(self):
        return format_exponent(self)

    def __reduce__(self):
        return (Exponent, (format_exponent(self),))


def _parse_exponent_str(text: str) -> Fraction | None:
    s = text.strip().lower()
    if s in ("inf", "+inf", "infinity", "∞"):
        return None
    if "/" in s:
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"bad rational exponent {text!r}") from exc
    try:
        x = float(s)
    except ValueError as exc:
        raise ValidationError(f"bad exponent {text!r}") from exc
    if math.isnan(x):
        raise ValidationError("exponent must not be NaN")
    return None if x == math.inf else Fraction(x)


def as_exponent(value) -> Exponent:
    return value if isinstance(value, Exponent) else Exponent(value)


def format_exponent(e: Exponent) -> str | float:
    """Round-trip safe text form: ``"inf"``, a float literal, or ``"a/b"``."""
    if e.is_infinite:
        return "inf"
    frac = e.fraction
    x = float(frac)
    if Fraction(x) == frac:
        return repr(x)
    return f"{frac.numerator}/{frac.denominator}"


INF = Exponent(math.inf)
ONE = Exponent(1)
TWO = Exponent(2)


class CellKind(enum.Enum):
    ATOM = "atom"
    DIFFUSE = "diffuse"


@dataclass(frozen=True)
class Cell:
    weight: float
    exponent: Exponent
    kind: CellKind = CellKind.ATOM

    def __post_init__(self):
        w = float(self.weight)
        if not (math.isfinite(w) and w > 0):
            raise ValidationError(f"cell weight must be positive and finite, got {self.weight!r}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "exponent", as_exponent(self.exponent))
        object.__setattr__(self, "kind", CellKind(self.kind))


class TailDirection(enum.Enum):
    FROM_ABOVE = "from_above"
    FROM_BELOW = "from_below"
    CONSTANT = "constant"


@dataclass(frozen=True)
class TailSpec:
    """Countable tail of unit-weight atoms indexed n = 1, 2, ...

    Family ``shifted``: exponent(n) = base + scale / sqrt(log(n + 2)), optionally
    conjugated cell-wise. The shift decreases strictly to 0 while
    n ** shift(n) still diverges.
    """

    base: Exponent
    scale: float = 1.0
    family: str = "shifted"
    conjugated: bool = False

    def __post_init__(self):
        if self.family != "shifted":
            raise ValidationError(f"unknown tail family {self.family!r}")
        base = as_exponent(self.base)
        if base.is_infinite:
            raise ValidationError("tail base must be finite")
        scale = float(self.scale)
        if not (math.isfinite(scale) and scale >= 0):
            raise ValidationError("tail scale must be finite and >= 0")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "scale", scale)

    def shift(self, n: int) -> float:
        return self.scale / math.sqrt(math.log(n + 2))

    def exponent(self, n: int) -> Exponent:
        if n < 1:
            raise ValidationError("tail atoms are indexed from 1")
        e = Exponent(self.base.fraction + Fraction(self.shift(n)))
        return e.conjugate() if self.conjugated else e

    @property
    def limit(self) -> Exponent:
        return self.base.conjugate() if self.conjugated else self.base

    @property
    def direction(self) -> TailDirection:
        if self.scale == 0:
            return TailDirection.CONSTANT
        return TailDirection.FROM_BELOW if self.conjugated else TailDirection.FROM_ABOVE

    @property
    def declared_bounds(self) -> tuple[Exponent, Exponent]:
        if self.direction is TailDirection.CONSTANT:
            return self.limit, self.limit
        first = self.exponent(1)
        if self.direction is TailDirection.FROM_ABOVE:
            return self.limit, first
        return first, self.limit

    def conjugate(self) -> "TailSpec":
        return TailSpec(self.base, self.scale, self.family, not self.conjugated)


@dataclass(frozen=True)
class SpaceSpec:
    cells: tuple[Cell, ...] = ()
    tail: TailSpec | None = None

    def __post_init__(self):
        cells = tuple(self.cells)
        for c in cells:
            if not isinstance(c, Cell):
                raise ValidationError("cells must be Cell instances")
        if not cells and self.tail is None:
            raise ValidationError("space is empty: needs at least one cell or a tail")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_exponents(
        cls,
        exponents: Iterable,
        weights: Iterable[float] | float = 1.0,
        kind: CellKind | str = CellKind.ATOM,
    ) -> "SpaceSpec":
        exps = [as_exponent(e) for e in exponents]
        if isinstance(weights, (int, float)):
            ws = [float(weights)] * len(exps)
        else:
            ws = [float(w) for w in weights]
        if len(ws) != len(exps):
            raise ValidationError("weights and exponents differ in length")
        return cls(tuple(Cell(w, e, CellKind(kind)) for w, e in zip(ws, exps)))

    @classmethod
    def constant(cls, p, n: int, weight: float = 1.0, kind=CellKind.ATOM) -> "SpaceSpec":
        return cls.from_exponents([p] * n, weight, kind)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def has_tail(self) -> bool:
        return self.tail is not None

    @property
    def finitely_atomic(self) -> bool:
        return self.tail is None and all(c.kind is CellKind.ATOM for c in self.cells)

    @property
    def non_atomic(self) -> bool:
        return self.tail is None and all(c.kind is CellKind.DIFFUSE for c in self.cells)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.array([c.weight for c in self.cells], dtype=float)
        w.setflags(write=False)
        return w

    @cached_property
    def exponents(self) -> np.ndarray:
        p = np.array([float(c.exponent) for c in self.cells], dtype=float)
        p.setflags(write=False)
        return p

    @cached_property
    def ess_sup_cells(self) -> float:
        return float(self.exponents.max()) if self.cells else 1.0

    def require_truncated(self) -> None:
        if self.tail is not None:
            raise ValidationError("space has an untruncated tail; call truncate() first")


@dataclass(frozen=True)
class ExponentSummary:
    ess_inf: Exponent
    ess_sup: Exponent
    tilde_inf: Exponent | None
    tilde_sup: Exponent | None

    @property
    def tilde_defined(self) -> bool:
        return self.tilde_inf is not None

    @property
    def is_constant(self) -> bool:
        return self.ess_inf == self.ess_sup

    @property
    def in_Pb(self) -> bool:
        return ONE < self.ess_inf and not self.ess_sup.is_infinite


def summarize(space: SpaceSpec) -> ExponentSummary:
    """Essential and atom-insensitive infima/suprema of the exponent.

    The tilde values ignore finitely many atoms, so only diffuse cells and the
    tail limit enter them; for finitely atomic spaces they are ``None``.
    """
    exps = [c.exponent for c in space.cells]
    tilde = [c.exponent for c in space.cells if c.kind is CellKind.DIFFUSE]
    if space.tail is not None:
        lo, hi = space.tail.declared_bounds
        exps += [lo, hi]
        tilde.append(space.tail.limit)
    if not exps:
        raise ValidationError("space is empty")
    if space.finitely_atomic:
        return ExponentSummary(min(exps), max(exps), None, None)
    return ExponentSummary(min(exps), max(exps), min(tilde), max(tilde))


def conjugate(e) -> Exponent:
    return as_exponent(e).conjugate()


def conjugate_space(space: SpaceSpec) -> SpaceSpec:
    cells = tuple(Cell(c.weight, c.exponent.conjugate(), c.kind) for c in space.cells)
    tail = space.tail.conjugate() if space.tail is not None else None
    return SpaceSpec(cells, tail)


@dataclass(frozen=True)
class IntervalIpq:
    lo: Exponent
    hi: Exponent
    lo_closed: bool
    hi_closed: bool

    def __post_init__(self):
        object.__setattr__(self, "lo", as_exponent(self.lo))
        object.__setattr__(self, "hi", as_exponent(self.hi))
        if self.hi < self.lo:
            raise ValidationError("interval with lo > hi")

    @property
    def is_empty(self) -> bool:
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def contains(self, r) -> bool:
        r = as_exponent(r)
        if r < self.lo or r > self.hi:
            return False
        if r == self.lo and not self.lo_closed:
            return False
        if r == self.hi and not self.hi_closed:
            return False
        return True

    def interior_contains(self, r) -> bool:
        r = as_exponent(r)
        return self.lo < r < self.hi

    def on_boundary(self, r) -> bool:
        r = as_exponent(r)
        return r == self.lo or r == self.hi

    def __str__(self):
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{_fmt_real(self.lo)},{_fmt_real(self.hi)}{right}"


def _fmt_real(e: Exponent) -> str:
    return "inf" if e.is_infinite else format(float(e), ".17g")


def interval_Ipq(p, q) -> IntervalIpq:
    """Range of r for the l^r-extension problem between constant exponents.

    ``p`` is the target exponent and ``q`` the source exponent.
    """
    return _interval_Ipq(as_exponent(p), as_exponent(q))


@lru_cache(maxsize=4096)
def _interval_Ipq(p: Exponent, q: Exponent) -> IntervalIpq:
    if p < q < TWO:
        return IntervalIpq(q, TWO, False, True)
    if TWO < p < q:
        return IntervalIpq(TWO, p, True, False)
    return IntervalIpq(min(TWO, q), max(TWO, p), True, True)


def interval_contains(interval: IntervalIpq, r) -> bool:
    return interval.contains(r)


def truncate(space: SpaceSpec, n: int) -> SpaceSpec:
    """Materialize tail atoms 1..n as explicit unit-weight cells."""
    if n < 0:
        raise ValidationError("truncation depth must be >= 0")
    if space.tail is None:
        return space
    tail_cells = tuple(Cell(1.0, space.tail.exponent(k), CellKind.ATOM) for k in range(1, n + 1))
    return SpaceSpec(space.cells + tail_cells, None)


# -- JSON config ------------------------------------------------------------


def space_to_dict(space: SpaceSpec) -> dict:
    out: dict = {
        "cells": [
            {"w": c.weight, "p": format_exponent(c.exponent), "kind": c.kind.value}
            for c in space.cells
        ]
    }
    if space.tail is not None:
        t = space.tail
        out["tail"] = {
            "family": t.family,
            "base": format_exponent(t.base),
            "scale": t.scale,
        }
        if t.conjugated:
            out["tail"]["conjugate"] = True
    return out


def _exponent_field(value, where: str) -> Exponent:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ValidationError(f"{where}: expected a number >= 1 or 'inf', got {value!r}")
    try:
        return Exponent(value)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def _number_field(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {value!r}")
    return float(value)


def space_from_dict(data, where: str = "space") -> SpaceSpec:
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected an object")
    unknown = set(data) - {"cells", "tail", "f", "F"}
    if unknown:
        raise ValidationError(f"{where}: unknown field(s) {sorted(unknown)}")
    raw_cells = data.get("cells", [])
    if not isinstance(raw_cells, list):
        raise ValidationError(f"{where}.cells: expected a list")
    cells = []
    for i, rc in enumerate(raw_cells):
        at = f"{where}.cells[{i}]"
        if not isinstance(rc, dict):
            raise ValidationError(f"{at}: expected an object")
        extra = set(rc) - {"w", "p", "kind"}
        if extra:
            raise ValidationError(f"{at}: unknown field(s) {sorted(extra)}")
        if "p" not in rc:
            raise ValidationError(f"{at}.p: missing")
        w = _number_field(rc.get("w", 1.0), f"{at}.w")
        p = _exponent_field(rc["p"], f"{at}.p")
        kind = rc.get("kind", "atom")
        try:
            kind = CellKind(kind)
        except ValueError:
            raise ValidationError(f"{at}.kind: expected 'atom' or 'diffuse', got {kind!r}") from None
        try:
            cells.append(Cell(w, p, kind))
        except ValidationError as exc:
            raise ValidationError(f"{at}: {exc}") from None
    tail = None
    if data.get("tail") is not None:
        rt = data["tail"]
        at = f"{where}.tail"
        if not isinstance(rt, dict):
            raise ValidationError(f"{at}: expected an object")
        extra = set(rt) - {"family", "base", "scale", "conjugate"}
        if extra:
            raise ValidationError(f"{at}: unknown field(s) {sorted(extra)}")
        if "base" not in rt:
            raise ValidationError(f"{at}.base: missing")
        try:
            tail = TailSpec(
                base=_exponent_field(rt["base"], f"{at}.base"),
                scale=_number_field(rt.get("scale", 1.0), f"{at}.scale"),
                family=rt.get("family", "shifted"),
                conjugated=bool(rt.get("conjugate", False)),
            )
        except ValidationError as exc:
            if str(exc).startswith(at):
                raise
            raise ValidationError(f"{at}: {exc}") from None
    return SpaceSpec(tuple(cells), tail)
