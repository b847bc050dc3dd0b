"""Exact posterior computation on generated networks by variable elimination."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from bkb.core import KnowledgeBase, Term, ValueRange
from bkb.errors import UnknownTerm, ValidationFailed, ZeroEvidence
from bkb.generator import GroundNetwork, generate_network
from bkb.parser import parse_evidence, parse_kb, parse_query
from bkb.validator import ValidationReport, validate


@dataclass(frozen=True)
class Factor:
    """A non-negative table over the joint values of ``scope`` (last variable fastest)."""

    scope: tuple[Term, ...]
    ranges: tuple[ValueRange, ...]
    table: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(self.scope))
        object.__setattr__(self, "ranges", tuple(self.ranges))
        object.__setattr__(self, "table", tuple(self.table))
        if len(self.scope) != len(self.ranges):
            raise ValueError("scope and ranges differ in length")
        if len(set(self.scope)) != len(self.scope):
            raise ValueError("repeated variable in factor scope")
        if len(self.table) != math.prod(len(r) for r in self.ranges):
            raise ValueError("factor table has the wrong size")

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(len(r) for r in self.ranges)

    def strides(self) -> tuple[int, ...]:
        out, s = [], 1
        for c in reversed(self.cards):
            out.append(s)
            s *= c
        return tuple(reversed(out))

    def _pos(self, t: Term) -> int:
        try:
            return self.scope.index(t)
        except ValueError:
            raise UnknownTerm(t) from None

    def value(self, assignment: dict) -> float:
        idx = 0
        for t, rng, stride in zip(self.scope, self.ranges, self.strides()):
            idx += rng.index(assignment[t]) * stride
        return self.table[idx]


def scalar(value: float) -> Factor:
    return Factor((), (), (value,))


def node_factor(net: GroundNetwork, t: Term) -> Factor:
    """The link matrix of ``t`` viewed as a factor over (parents..., t)."""
    m = net.cpt[t]
    return Factor(net.parents[t] + (t,), m.antecedent_ranges + (m.consequent_range,), m.entries)


def restrict(f: Factor, t: Term, v: str) -> Factor:
    i = f._pos(t)
    k = f.ranges[i].index(v)
    stride = f.strides()[i]
    card = f.cards[i]
    block = stride * card
    table = [
        f.table[base + k * stride + off]
        for base in range(0, len(f.table), block)
        for off in range(stride)
    ]
    return Factor(f.scope[:i] + f.scope[i + 1 :], f.ranges[:i] + f.ranges[i + 1 :], table)


def sum_out(f: Factor, t: Term) -> Factor:
    i = f._pos(t)
    stride = f.strides()[i]
    card = f.cards[i]
    block = stride * card
    table = [
        math.fsum(f.table[base + k * stride + off] for k in range(card))
        for base in range(0, len(f.table), block)
        for off in range(stride)
    ]
    return Factor(f.scope[:i] + f.scope[i + 1 :], f.ranges[:i] + f.ranges[i + 1 :], table)


def multiply(f1: Factor, f2: Factor) -> Factor:
    scope = list(f1.scope)
    ranges = list(f1.ranges)
    for t, r in zip(f2.scope, f2.ranges):
        if t in scope:
            if ranges[scope.index(t)] != r:
                raise ValueError(f"{t} has different ranges in the two factors")
        else:
            scope.append(t)
            ranges.append(r)
    cards = [len(r) for r in ranges]
    pos1 = [scope.index(t) for t in f1.scope]
    pos2 = [scope.index(t) for t in f2.scope]
    s1, s2 = f1.strides(), f2.strides()
    n = math.prod(cards)
    table = [0.0] * n
    idx = [0] * len(cards)
    for flat in range(n):
        i1 = sum(idx[p] * s for p, s in zip(pos1, s1))
        i2 = sum(idx[p] * s for p, s in zip(pos2, s2))
        table[flat] = f1.table[i1] * f2.table[i2]
        # odometer increment, last variable fastest
        for d in range(len(cards) - 1, -1, -1):
            idx[d] += 1
            if idx[d] < cards[d]:
                break
            idx[d] = 0
    return Factor(tuple(scope), tuple(ranges), table)


def multiply_all(factors: Iterable[Factor]) -> Factor:
    out = scalar(1.0)
    for f in factors:
        out = multiply(out, f)
    return out


def min_degree_order(net: GroundNetwork, eliminate: Iterable[Term], removed: Iterable[Term] = ()) -> list[Term]:
    """Greedy min-degree ordering on the moral graph, ties broken by term name.

    ``removed`` terms (observed evidence) are dropped from the graph first.
    """
    removed = set(removed)
    adj: dict[Term, set[Term]] = {n: set() for n in net.nodes if n not in removed}
    for n in net.nodes:
        family = [m for m in (n, *net.parents[n]) if m not in removed]
        for a in family:
            for b in family:
                if a != b:
                    adj[a].add(b)
    todo = set(eliminate)
    order = []
    while todo:
        v = min(todo, key=lambda t: (len(adj[t]), str(t)))
        nbrs = adj.pop(v)
        for a in nbrs:
            adj[a].discard(v)
            adj[a] |= nbrs - {a}
        todo.remove(v)
        order.append(v)
    return order


@dataclass(frozen=True)
class Posterior:
    query: Term
    values: tuple[str, ...]
    probs: tuple[float, ...]
    evidence_probability: float

    def prob(self, value: str) -> float:
        return self.probs[self.values.index(value)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.values, self.probs))

    def to_text(self) -> str:
        lines = [f"P({self.query} | evidence)"]
        lines += [f"{v}: {p:.17g}" for v, p in zip(self.values, self.probs)]
        lines.append(f"P(evidence): {self.evidence_probability:.17g}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "query": str(self.query),
            "posterior": self.as_dict(),
            "evidence_probability": self.evidence_probability,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def variable_elimination(
    net: GroundNetwork,
    order: Union[str, Sequence[Term]] = "min-degree",
) -> Posterior:
    """P(query | evidence) on ``net``.

    ``order`` is ``"min-degree"``, ``"reverse-lex"`` or an explicit sequence
    covering every non-query, non-evidence node.
    """
    evidence = net.evidence_dict
    query = net.query
    qrange = net.range_of(query)
    for t, v in evidence.items():
        net.range_of(t).index(v)

    factors = []
    for n in net.nodes:
        f = node_factor(net, n)
        for t in f.scope:
            if t in evidence:
                f = restrict(f, t, evidence[t])
        factors.append(f)

    hidden = [n for n in net.nodes if n != query and n not in evidence]
    if order == "min-degree":
        elim = min_degree_order(net, hidden, evidence)
    elif order == "reverse-lex":
        elim = sorted(hidden, key=str, reverse=True)
    elif isinstance(order, str):
        raise ValueError(f"unknown elimination order {order!r}")
    else:
        elim = list(order)
        if sorted(elim, key=str) != sorted(hidden, key=str):
            raise ValueError("elimination order must list every hidden node exactly once")

    for v in elim:
        touching = [f for f in factors if v in f.scope]
        factors = [f for f in factors if v not in f.scope]
        factors.append(sum_out(multiply_all(touching), v))

    result = multiply_all(factors)
    if query in evidence:
        p_e = result.table[0]
        probs = tuple(1.0 if val == evidence[query] else 0.0 for val in qrange.values)
    else:
        p_e = math.fsum(result.table)
    if p_e == 0.0:
        raise ZeroEvidence("the evidence has probability zero")
    if query not in evidence:
        probs = tuple(p / p_e for p in result.table)
    return Posterior(query, qrange.values, probs, p_e)


def posterior(
    kb: Union[KnowledgeBase, str],
    query_text: Union[str, Term],
    evidence_text: Union[str, Sequence[tuple[Term, str]]] = "",
    force: bool = False,
) -> tuple[Posterior, GroundNetwork]:
    """Parse, validate, generate and solve in one call.

    Raises :class:`ValidationFailed` on an ill-formed knowledge base unless ``force``.
    """
    if isinstance(kb, str):
        kb = parse_kb(kb)
    report: ValidationReport = validate(kb)
    if not report.ok and not force:
        raise ValidationFailed(report)
    query = parse_query(query_text, kb) if isinstance(query_text, str) else query_text
    evidence = parse_evidence(evidence_text, kb) if isinstance(evidence_text, str) else list(evidence_text)
    net = generate_network(kb, query, evidence)
    return variable_elimination(net), net

