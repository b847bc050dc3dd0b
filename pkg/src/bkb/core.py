"""Domain types for knowledge bases: ranges, symbols, terms, rules, link matrices.

Everything here is immutable after construction. Terms refer to their function
symbol by name; the owning :class:`KnowledgeBase` resolves names to symbols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from bkb.errors import IncompleteBinding, KBError, ValueOutOfRange

ROW_SUM_TOL = 1e-9

Binding = Mapping[str, str]


@dataclass(frozen=True)
class ValueRange:
    """An ordered set of mutually exclusive, exhaustive value labels."""

    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) < 2:
            raise ValueError(f"range {self.name} needs at least two values")
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"range {self.name} has repeated values")

    def __len__(self) -> int:
        return len(self.values)

    def index(self, value: str) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise ValueOutOfRange(f"{value!r} is not in range {self.name} {{{', '.join(self.values)}}}") from None


@dataclass(frozen=True)
class FunctionSymbol:
    name: str
    arity: int
    range: ValueRange

    def __post_init__(self):
        if self.arity < 0:
            raise ValueError("arity must be non-negative")


@dataclass(frozen=True, order=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


Argument = Union[Variable, Constant]


@dataclass(frozen=True)
class Term:
    """A function symbol applied to variables and constants, e.g. ``Neighbor(n,Holmes)``."""

    functor: str
    args: tuple[Argument, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    @classmethod
    def ground(cls, functor: str, *constants: str) -> "Term":
        return cls(functor, tuple(Constant(c) for c in constants))

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_ground(self) -> bool:
        return all(isinstance(a, Constant) for a in self.args)

    def variables(self) -> set[str]:
        return {a.name for a in self.args if isinstance(a, Variable)}

    def __str__(self) -> str:
        if not self.args:
            return self.functor
        return f"{self.functor}({','.join(str(a) for a in self.args)})"

    def __repr__(self) -> str:
        return f"Term<{self}>"

    def __lt__(self, other: "Term") -> bool:
        return str(self) < str(other)


def substitute(t: Term, b: Binding) -> Term:
    """Replace each variable of ``t`` bound in ``b`` by its constant."""
    args = tuple(
        Constant(b[a.name]) if isinstance(a, Variable) and a.name in b else a for a in t.args
    )
    return Term(t.functor, args)


def match(pattern: Term, ground: Term) -> Optional[dict[str, str]]:
    """One-sided matching of ``pattern`` against a ground term.

    Returns the binding that makes ``pattern`` equal to ``ground``, or None.
    """
    if pattern.functor != ground.functor or pattern.arity != ground.arity:
        return None
    binding: dict[str, str] = {}
    for p, g in zip(pattern.args, ground.args):
        if not isinstance(g, Constant):
            raise ValueError(f"match target {ground} is not ground")
        if isinstance(p, Constant):
            if p.name != g.name:
                return None
        elif binding.setdefault(p.name, g.name) != g.name:
            return None
    return binding


@dataclass(frozen=True)
class LinkMatrix:
    """Conditional probability table of a rule, stored as a flat row-major list.

    Rows enumerate antecedent value combinations with the last antecedent
    varying fastest; columns follow the consequent range order. Shape and
    normalization are not enforced here so that malformed matrices can be
    built and then reported by the validator.
    """

    antecedent_ranges: tuple[ValueRange, ...]
    consequent_range: ValueRange
    entries: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "antecedent_ranges", tuple(self.antecedent_ranges))
        object.__setattr__(self, "entries", tuple(float(e) for e in self.entries))

    @classmethod
    def from_rows(cls, antecedent_ranges, consequent_range, rows) -> "LinkMatrix":
        return cls(tuple(antecedent_ranges), consequent_range, tuple(p for row in rows for p in row))

    @property
    def n_rows(self) -> int:
        return math.prod(len(r) for r in self.antecedent_ranges)

    @property
    def expected_size(self) -> int:
        return self.n_rows * len(self.consequent_range)

    @property
    def rows(self) -> tuple[tuple[float, ...], ...]:
        k = len(self.consequent_range)
        return tuple(self.entries[i : i + k] for i in range(0, len(self.entries), k))

    def row_index(self, parent_values: Sequence[str]) -> int:
        if len(parent_values) != len(self.antecedent_ranges):
            raise ValueOutOfRange(
                f"expected {len(self.antecedent_ranges)} parent values, got {len(parent_values)}"
            )
        idx = 0
        for rng, v in zip(self.antecedent_ranges, parent_values):
            idx = idx * len(rng) + rng.index(v)
        return idx

    def problems(self, tol: float = ROW_SUM_TOL) -> list[str]:
        """Human-readable shape and normalization defects; empty when well formed."""
        out = []
        if len(self.entries) != self.expected_size:
            out.append(f"has {len(self.entries)} entries, expected {self.expected_size}")
            return out
        for i, row in enumerate(self.rows):
            bad = [p for p in row if not (0.0 <= p <= 1.0)]
            if bad:
                out.append(f"row {i} has entries outside [0,1]: {bad}")
            s = math.fsum(row)
            if abs(s - 1.0) > tol:
                out.append(f"row {i} sums to {s!r}")
        return out


def matrix_lookup(m: LinkMatrix, parent_values: Sequence[str], child_value: str) -> float:
    row = m.row_index(parent_values)
    col = m.consequent_range.index(child_value)
    return m.entries[row * len(m.consequent_range) + col]


@dataclass(frozen=True)
class Rule:
    id: str
    consequent: Term
    antecedents: tuple[Term, ...]
    matrix: LinkMatrix

    def __post_init__(self):
        object.__setattr__(self, "antecedents", tuple(self.antecedents))

    def variables(self) -> set[str]:
        out = self.consequent.variables()
        for a in self.antecedents:
            out |= a.variables()
        return out

    def __str__(self) -> str:
        if not self.antecedents:
            return f"{self.id}: {self.consequent}"
        return f"{self.id}: {self.consequent} | {', '.join(map(str, self.antecedents))}"


@dataclass(frozen=True)
class GroundRuleInstance:
    rule_id: str
    consequent: Term
    antecedents: tuple[Term, ...]
    matrix: LinkMatrix


def rule_ground_instance(r: Rule, b: Binding) -> GroundRuleInstance:
    missing = r.variables() - set(b)
    if missing:
        raise IncompleteBinding(r.id, list(missing))
    return GroundRuleInstance(
        r.id,
        substitute(r.consequent, b),
        tuple(substitute(a, b) for a in r.antecedents),
        r.matrix,
    )


@dataclass(frozen=True)
class KnowledgeBase:
    ranges: tuple[ValueRange, ...] = ()
    symbols: tuple[FunctionSymbol, ...] = ()
    rules: tuple[Rule, ...] = ()
    _range_map: dict = field(default=None, init=False, repr=False, compare=False)
    _symbol_map: dict = field(default=None, init=False, repr=False, compare=False)
    _rule_map: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("ranges", "symbols", "rules"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "_range_map", _unique({r.name: r for r in self.ranges}, self.ranges, "range"))
        object.__setattr__(self, "_symbol_map", _unique({s.name: s for s in self.symbols}, self.symbols, "symbol"))
        object.__setattr__(self, "_rule_map", _unique({r.id: r for r in self.rules}, self.rules, "rule"))
        for s in self.symbols:
            if self._range_map.get(s.range.name) != s.range:
                raise KBError(f"symbol {s.name} uses undeclared range {s.range.name}")
        for r in self.rules:
            terms = (r.consequent, *r.antecedents)
            for t in terms:
                sym = self._symbol_map.get(t.functor)
                if sym is None:
                    raise KBError(f"rule {r.id}: unknown symbol {t.functor}")
                if sym.arity != t.arity:
                    raise KBError(f"rule {r.id}: {t} has arity {t.arity}, {sym.name} expects {sym.arity}")
            if r.matrix.consequent_range != self.range_of(r.consequent):
                raise KBError(f"rule {r.id}: matrix consequent range does not match {r.consequent.functor}")
            if r.matrix.antecedent_ranges != tuple(self.range_of(a) for a in r.antecedents):
                raise KBError(f"rule {r.id}: matrix antecedent ranges do not match the antecedents")

    def range(self, name: str) -> ValueRange:
        return self._range_map[name]

    def symbol(self, name: str) -> FunctionSymbol:
        return self._symbol_map[name]

    def has_symbol(self, name: str) -> bool:
        return name in self._symbol_map

    def rule(self, rule_id: str) -> Rule:
        return self._rule_map[rule_id]

    def range_of(self, t: Term) -> ValueRange:
        return self._symbol_map[t.functor].range

    def replace_rules(self, rules: Iterable[Rule]) -> "KnowledgeBase":
        return KnowledgeBase(self.ranges, self.symbols, tuple(rules))


def _unique(mapping: dict, items: tuple, what: str) -> dict:
    if len(mapping) != len(items):
        seen = set()
        for it in items:
            key = it.name if hasattr(it, "name") else it.id
            if key in seen:
                raise KBError(f"duplicate {what} {key}")
            seen.add(key)
    return mapping
