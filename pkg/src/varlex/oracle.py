"""Finiteness verdicts for l^r-extension constants and a bound-propagation engine.

Verdicts are three-valued. On spaces with atoms the characterization is only
one-sided at the boundary of the admissible interval, so boundary points other
than r = 2 come back ``UNDETERMINED`` rather than being guessed.

The propagation engine keeps, for every key (source, target, r) of a finite
user-declared key set, the best known upper bound on the extension constant
together with the chain of rules that produced it.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ValidationError
from .spaces import (
    INF,
    ONE,
    TWO,
    Exponent,
    ExponentSummary,
    IntervalIpq,
    SpaceSpec,
    as_exponent,
    format_exponent,
    interval_Ipq,
    summarize,
)
from .stable import moment_c

__all__ = [
    "Status",
    "Verdict",
    "SpaceFlags",
    "ExtensionQuery",
    "decide_constant",
    "decide_variable",
    "decide_atomic",
    "decide",
    "ExponentDescriptor",
    "BoundKey",
    "BoundFact",
    "BoundLedger",
    "RULES",
    "SEED_RULES",
    "builtin_seeds",
    "propagate_bounds",
    "replay",
]

FINITELY_ATOMIC_MSG = (
    "space is a union of finitely many atoms; verdicts require spaces that are "
    "not union of finitely many atoms"
)


class Status(enum.Enum):
    FINITE = "Finite"
    INFINITE = "Infinite"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Verdict:
    status: Status
    rule: str
    interval: IntervalIpq | None = None
    bound: float | None = None
    note: str = ""


@dataclass(frozen=True)
class SpaceFlags:
    non_atomic: bool
    finitely_atomic: bool


@dataclass(frozen=True)
class ExtensionQuery:
    source_summary: ExponentSummary
    target_summary: ExponentSummary
    source_flags: SpaceFlags
    target_flags: SpaceFlags
    r: Exponent

    def __post_init__(self):
        object.__setattr__(self, "r", as_exponent(self.r))

    @classmethod
    def from_spaces(cls, source: SpaceSpec, target: SpaceSpec, r) -> "ExtensionQuery":
        return cls(
            summarize(source),
            summarize(target),
            SpaceFlags(source.non_atomic, source.finitely_atomic),
            SpaceFlags(target.non_atomic, target.finitely_atomic),
            as_exponent(r),
        )


def decide_constant(q, p, r) -> Verdict:
    """Verdict for constant source exponent q, target exponent p and sum exponent r."""
    q, p, r = as_exponent(q), as_exponent(p), as_exponent(r)
    I = interval_Ipq(p, q)
    if q == ONE or p.is_infinite:
        return Verdict(Status.FINITE, "constant-endpoint: q = 1 or p = inf gives k = 1", I, 1.0)
    if I.contains(r):
        return Verdict(Status.FINITE, f"r in I(p,q) = {I}", I)
    return Verdict(Status.INFINITE, f"r not in I(p,q) = {I}", I)


def _reject_finitely_atomic(query: ExtensionQuery) -> None:
    for side, flags in (("source", query.source_flags), ("target", query.target_flags)):
        if flags.finitely_atomic:
            raise ValidationError(f"{side}: {FINITELY_ATOMIC_MSG}")


def _require_Pb(query: ExtensionQuery) -> None:
    for side, s in (("source", query.source_summary), ("target", query.target_summary)):
        if not s.in_Pb:
            raise ValidationError(
                f"{side}: exponent range [{s.ess_inf}, {s.ess_sup}] must satisfy 1 < inf <= sup < inf"
            )


def decide_variable(query: ExtensionQuery) -> Verdict:
    """Verdict for non-atomic spaces: finite iff r lies in I(p_-, q_+).

    Constant source exponents 1 and inf are handled as endpoint cases; spaces
    with atoms are passed on to :func:`decide_atomic`.
    """
    _reject_finitely_atomic(query)
    if not (query.source_flags.non_atomic and query.target_flags.non_atomic):
        return decide_atomic(query)
    src, tgt, r = query.source_summary, query.target_summary, query.r
    if tgt.is_constant and tgt.ess_inf.is_infinite:
        return decide_constant(src.ess_sup, INF, r)
    if src.is_constant and src.ess_inf == ONE:
        if tgt.is_constant:
            return decide_constant(ONE, tgt.ess_inf, r)
        if r.is_infinite:
            raise ValidationError("q = 1 with variable target is covered only for r < inf")
        if not tgt.in_Pb:
            raise ValidationError("target exponent must satisfy 1 < p_- <= p_+ < inf")
        return Verdict(Status.FINITE, "constant-endpoint: q = 1 gives k < inf for every r < inf")
    if src.is_constant and src.ess_inf.is_infinite:
        if not tgt.in_Pb:
            raise ValidationError("target exponent must satisfy 1 < p_- <= p_+ < inf")
        I = interval_Ipq(tgt.ess_inf, INF)
        status = Status.FINITE if I.contains(r) else Status.INFINITE
        word = "in" if status is Status.FINITE else "not in"
        return Verdict(status, f"q = inf: r {word} I(p_-,inf) = {I}", I)
    _require_Pb(query)
    I = interval_Ipq(tgt.ess_inf, src.ess_sup)
    if I.contains(r):
        return Verdict(Status.FINITE, f"r in I(p_-,q_+) = {I}", I)
    return Verdict(Status.INFINITE, f"r not in I(p_-,q_+) = {I}", I)


def decide_atomic(query: ExponentSummary | ExtensionQuery) -> Verdict:
    """Verdict from the atom-insensitive interval I(p~_-, q~_+).

    Outside the interval: Infinite. Interior points and r = 2: Finite. The
    remaining closed endpoints are Undetermined; the tail example with
    q(n) = q0 + lam_n shows the constant can be infinite there.
    """
    _reject_finitely_atomic(query)
    _require_Pb(query)
    p_t = query.target_summary.tilde_inf
    q_t = query.source_summary.tilde_sup
    I = interval_Ipq(p_t, q_t)
    r = query.r
    if not I.contains(r):
        return Verdict(Status.INFINITE, f"r not in I(p~_-,q~_+) = {I}", I)
    if I.interior_contains(r) or r == TWO:
        return Verdict(Status.FINITE, f"r in int I(p~_-,q~_+) or r = 2, I = {I}", I)
    return Verdict(
        Status.UNDETERMINED,
        f"r on the boundary of I(p~_-,q~_+) = {I}",
        I,
        note="boundary points can be finite or infinite; the shifted-tail family is infinite at r = q0",
    )


def decide(source: SpaceSpec, target: SpaceSpec, r) -> Verdict:
    if source.finitely_atomic or target.finitely_atomic:
        side = "source" if source.finitely_atomic else "target"
        raise ValidationError(f"{side}: {FINITELY_ATOMIC_MSG}")
    return decide_variable(ExtensionQuery.from_spaces(source, target, r))


# -- bound propagation ------------------------------------------------------


@dataclass(frozen=True, order=False)
class ExponentDescriptor:
    """A named space restricted to some of its cells, with the exponent on each."""

    space: str
    cells: tuple[int, ...]
    exponents: tuple[Exponent, ...]

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        exps = tuple(as_exponent(e) for e in self.exponents)
        if not cells:
            raise ValidationError("descriptor needs at least one cell")
        if len(cells) != len(exps):
            raise ValidationError("descriptor cells and exponents differ in length")
        if len(set(cells)) != len(cells):
            raise ValidationError("descriptor cells must be distinct")
        order = sorted(range(len(cells)), key=cells.__getitem__)
        object.__setattr__(self, "cells", tuple(cells[i] for i in order))
        object.__setattr__(self, "exponents", tuple(exps[i] for i in order))

    @property
    def mapping(self) -> dict[int, Exponent]:
        return dict(zip(self.cells, self.exponents))

    def conjugate(self) -> "ExponentDescriptor":
        return ExponentDescriptor(self.space, self.cells, tuple(e.conjugate() for e in self.exponents))

    @property
    def in_Pb(self) -> bool:
        return all(ONE < e and not e.is_infinite for e in self.exponents)

    @property
    def constant(self) -> Exponent | None:
        first = self.exponents[0]
        return first if all(e == first for e in self.exponents) else None

    def same_support(self, other: "ExponentDescriptor") -> bool:
        return self.space == other.space and self.cells == other.cells

    def pointwise_le(self, other: "ExponentDescriptor") -> bool:
        return self.same_support(other) and all(a <= b for a, b in zip(self.exponents, other.exponents))

    def restricts(self, other: "ExponentDescriptor") -> bool:
        """True if self is other restricted to a subset of its cells."""
        if self.space != other.space:
            return False
        big = other.mapping
        return all(c in big and big[c] == e for c, e in zip(self.cells, self.exponents))

    def __str__(self):
        cells = ",".join(str(c) for c in self.cells)
        exps = ",".join(str(format_exponent(e)) for e in self.exponents)
        return f"{self.space}[{cells}]:({exps})"


@dataclass(frozen=True)
class BoundKey:
    source: ExponentDescriptor
    target: ExponentDescriptor
    r: Exponent

    def __post_init__(self):
        object.__setattr__(self, "r", as_exponent(self.r))

    def dual(self) -> "BoundKey":
        return BoundKey(self.target.conjugate(), self.source.conjugate(), self.r.conjugate())

    def __str__(self):
        return f"q={self.source}|p={self.target}|r={format_exponent(self.r)}"


@dataclass(frozen=True)
class Step:
    rule: str
    key: BoundKey
    factor: int

    def __str__(self):
        return f"{self.rule} x{self.factor} -> {self.key}"


@dataclass(frozen=True)
class BoundFact:
    """Upper bound on the extension constant at ``key`` with its derivation.

    ``value`` is exact (``None`` means +inf). ``known_finite`` marks facts that
    only assert finiteness without a numeric constant.
    """

    key: BoundKey
    value: Fraction | None
    known_finite: bool
    seed_rule: str
    seed_value: Fraction | None
    origin: BoundKey
    steps: tuple[Step, ...] = ()

    @property
    def upper_bound(self) -> float:
        return float("inf") if self.value is None else float(self.value)

    @property
    def derivation(self) -> list[str]:
        seed = "inf" if self.seed_value is None else repr(float(self.seed_value))
        return [f"seed:{self.seed_rule}={seed} @ {self.origin}"] + [str(s) for s in self.steps]

    def _order(self):
        # smaller bound, then finite-known, then shorter chain, then chain text
        v = self.value
        return (
            v is None,
            v if v is not None else Fraction(0),
            not self.known_finite,
            len(self.steps),
            tuple(self.derivation),
        )

    def better_than(self, other: "BoundFact | None") -> bool:
        return other is None or self._order() < other._order()

    def extend(self, rule: str, key: BoundKey, factor: int) -> "BoundFact":
        value = None if self.value is None else self.value * factor
        return BoundFact(key, value, self.known_finite, self.seed_rule, self.seed_value,
                         self.origin, self.steps + (Step(rule, key, factor),))

    @classmethod
    def seed(cls, key: BoundKey, rule: str, bound=None) -> "BoundFact":
        if rule not in SEED_RULES:
            raise ValidationError(f"unknown seed rule {rule!r}; expected one of {sorted(SEED_RULES)}")
        if rule == "finite-unknown":
            return cls(key, None, True, rule, None, key)
        if bound is None:
            raise ValidationError(f"seed rule {rule!r} needs a numeric bound")
        if isinstance(bound, str) and bound.strip().lower() in ("inf", "infinity"):
            return cls(key, None, False, rule, None, key)
        try:
            val = Fraction(bound) if isinstance(bound, (int, Fraction, str)) else Fraction(float(bound))
        except (TypeError, ValueError):
            raise ValidationError(f"seed bound must be a number, got {bound!r}") from None
        if val <= 0:
            raise ValidationError("seed bound must be positive")
        return cls(key, val, True, rule, val, key)


# rule predicates: (from_key, to_key) -> bool, with the multiplicative factor


def _duality(a: BoundKey, b: BoundKey) -> bool:
    return a.source.in_Pb and a.target.in_Pb and b == a.dual()


def _r_up(a: BoundKey, b: BoundKey) -> bool:
    return (
        a.source == b.source and a.target == b.target and a.target.in_Pb
        and ONE <= a.r < b.r <= TWO
    )


def _r_down(a: BoundKey, b: BoundKey) -> bool:
    # bound at s gives a bound at r for 2 <= r < s < inf
    return (
        a.source == b.source and a.target == b.target and a.target.in_Pb
        and TWO <= b.r < a.r and not a.r.is_infinite
    )


def _target_growth(a: BoundKey, b: BoundKey) -> bool:
    return (
        a.source == b.source and a.r == b.r and not a.r.is_infinite
        and a.target != b.target and a.target.in_Pb and b.target.in_Pb
        and a.target.pointwise_le(b.target)
    )


def _source_shrink(a: BoundKey, b: BoundKey) -> bool:
    return (
        a.target == b.target and a.r == b.r and not a.r.is_infinite
        and a.source != b.source and a.source.in_Pb and b.source.in_Pb and a.target.in_Pb
        and b.source.pointwise_le(a.source)
    )


def _restriction(a: BoundKey, b: BoundKey) -> bool:
    return (
        a.r == b.r and (a.source, a.target) != (b.source, b.target)
        and a.source.in_Pb and a.target.in_Pb
        and b.source.restricts(a.source) and b.target.restricts(a.target)
    )


RULES: dict[str, tuple[object, int]] = {
    "duality": (_duality, 4),
    "r-up": (_r_up, 1),
    "r-down": (_r_down, 16),
    "target-growth": (_target_growth, 9),
    "source-shrink": (_source_shrink, 144),
    "restriction": (_restriction, 1),
}

SEED_RULES = frozenset({"given", "finite-unknown", "constant-endpoint", "c-ratio"})


def builtin_seeds(keys) -> list[BoundFact]:
    """k = 1 at constant endpoints and the stable-moment ratio for small constants.

    The ratio c_{r,q} / c_{r,p} is seeded for constant target p and source q
    with p <= q < 2 and q < r <= 2; it is a value quoted from the literature for
    this regime rather than derived here.
    """
    out = []
    for key in keys:
        q, p = key.source.constant, key.target.constant
        if q == ONE or (p is not None and p.is_infinite):
            out.append(BoundFact.seed(key, "constant-endpoint", 1))
            continue
        if q is not None and p is not None and ONE <= p <= q < TWO and q < key.r <= TWO:
            ratio = moment_c(float(key.r), float(q)) / moment_c(float(key.r), float(p))
            out.append(BoundFact.seed(key, "c-ratio", max(ratio, 1.0)))
    return out


def _close_keys(keys) -> list[BoundKey]:
    closed = set()
    for k in keys:
        closed.add(k)
        closed.add(k.dual())
    return sorted(closed, key=str)


@dataclass
class BoundLedger:
    facts: dict[BoundKey, BoundFact]
    keys: list[BoundKey]
    rounds: int
    converged: bool
    queries: list[BoundKey] = field(default_factory=list)

    def bound(self, key: BoundKey) -> BoundFact | None:
        return self.facts.get(key)

    def rows(self, only_queries: bool = False) -> list[tuple[str, float, bool, str]]:
        """(key, bound, known_finite, derivation) in key order; missing keys get bound inf."""
        keys = self.queries if only_queries else self.keys
        out = []
        for k in keys:
            f = self.facts.get(k)
            if f is None:
                out.append((str(k), float("inf"), False, ""))
            else:
                out.append((str(k), f.upper_bound, f.known_finite, " ; ".join(f.derivation)))
        return out

    def signature(self) -> list[tuple[str, object, bool, tuple[str, ...]]]:
        return [
            (str(k), self.facts[k].value, self.facts[k].known_finite, tuple(self.facts[k].derivation))
            for k in self.keys
            if k in self.facts
        ]


def propagate_bounds(
    seeds,
    queries,
    max_steps: int = 1000,
    order_seed: int | None = None,
    use_builtin: bool = True,
) -> BoundLedger:
    """Relax all rules over the conjugation-closed key set until nothing improves.

    Facts are compared exactly (bound, finiteness flag, chain length, chain
    text), a total order compatible with extending chains, so the fixpoint does
    not depend on the order rules are tried. ``order_seed`` shuffles that order,
    which is how confluence is tested.
    """
    seeds = list(seeds)
    for s in seeds:
        if not isinstance(s, BoundFact):
            raise ValidationError("seeds must be BoundFact instances")
        if s.seed_rule not in SEED_RULES:
            raise ValidationError(f"unknown seed rule {s.seed_rule!r}")
    queries = list(queries)
    keys = _close_keys(queries + [s.key for s in seeds])
    if use_builtin:
        seeds = seeds + builtin_seeds(keys)
    facts: dict[BoundKey, BoundFact] = {}
    for s in seeds:
        if s.better_than(facts.get(s.key)):
            facts[s.key] = s

    rng = random.Random(order_seed) if order_seed is not None else None
    rule_items = list(RULES.items())
    rounds = 0
    converged = False
    while rounds < max_steps:
        rounds += 1
        changed = False
        order = list(keys)
        rules = list(rule_items)
        targets = list(keys)
        if rng is not None:
            rng.shuffle(order)
            rng.shuffle(rules)
            rng.shuffle(targets)
        for a in order:
            fa = facts.get(a)
            if fa is None:
                continue
            for name, (pred, factor) in rules:
                for b in targets:
                    if a == b or not pred(a, b):
                        continue
                    cand = facts[a].extend(name, b, factor)
                    if cand.better_than(facts.get(b)):
                        facts[b] = cand
                        changed = True
        if not changed:
            converged = True
            break
    return BoundLedger(facts, keys, rounds, converged, queries)


def replay(fact: BoundFact) -> Fraction | None:
    """Recompute a fact's bound from its seed, checking every step's rule condition."""
    if fact.seed_rule not in SEED_RULES:
        raise ValidationError(f"unknown seed rule {fact.seed_rule!r}")
    value = fact.seed_value
    cur = fact.origin
    for step in fact.steps:
        pred, factor = RULES[step.rule]
        if factor != step.factor or not pred(cur, step.key):
            raise ValidationError(f"derivation step {step} does not apply from {cur}")
        value = None if value is None else value * factor
        cur = step.key
    if cur != fact.key:
        raise ValidationError("derivation does not end at the fact's key")
    return value
