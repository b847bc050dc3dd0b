"""Query-driven network construction by backward chaining over the rules.

Starting from the query and then from each evidence term, every ground term is
resolved to the single rule instance that concludes it, and its antecedents are
grounded in turn until root terms are reached. Terms already in the network are
linked rather than regenerated, so a rule used for several constants (R4 for
Watson and for Moriarty in the burglary example) yields several shared-parent
instances. Terms that lie below the query with no evidence below them are never
reached, so barren nodes are not generated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

from bkb.core import (
    GroundRuleInstance,
    KnowledgeBase,
    LinkMatrix,
    Rule,
    Term,
    ValueRange,
    match,
    rule_ground_instance,
)
from bkb.errors import CycleDetected, EvidenceValueOutOfRange, MissingRule, UnknownNode

Evidence = Sequence[tuple[Term, str]]


@dataclass(frozen=True)
class GroundNetwork:
    """A DAG of ground terms, each carrying the link matrix of the rule instance that concludes it."""

    nodes: tuple[Term, ...]
    parents: Mapping[Term, tuple[Term, ...]]
    cpt: Mapping[Term, LinkMatrix]
    query: Term
    evidence: tuple[tuple[Term, str], ...] = ()
    rule_of: Mapping[Term, str] = field(default_factory=dict)
    _children: Mapping[Term, tuple[Term, ...]] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "evidence", tuple(self.evidence))
        object.__setattr__(self, "parents", MappingProxyType({n: tuple(self.parents[n]) for n in self.nodes}))
        object.__setattr__(self, "cpt", MappingProxyType(dict(self.cpt)))
        object.__setattr__(self, "rule_of", MappingProxyType(dict(self.rule_of)))
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise ValueError("duplicate nodes")
        children: dict[Term, list[Term]] = {n: [] for n in self.nodes}
        for n in self.nodes:
            m = self.cpt[n]
            if len(m.antecedent_ranges) != len(self.parents[n]):
                raise ValueError(f"{n}: parent list does not match its link matrix")
            for p, rng in zip(self.parents[n], m.antecedent_ranges):
                if p not in node_set:
                    raise ValueError(f"{n}: parent {p} is not a node")
                if self.cpt[p].consequent_range != rng:
                    raise ValueError(f"{n}: parent {p} has range {self.cpt[p].consequent_range.name}, expected {rng.name}")
                children[p].append(n)
        object.__setattr__(self, "_children", MappingProxyType({n: tuple(c) for n, c in children.items()}))
        if self.query not in node_set:
            raise ValueError(f"query {self.query} is not a node")
        for t, v in self.evidence:
            if t not in node_set:
                raise ValueError(f"evidence term {t} is not a node")
            self.range_of(t).index(v)

    def __contains__(self, t: Term) -> bool:
        return t in self.parents

    def __len__(self) -> int:
        return len(self.nodes)

    def _check(self, t: Term) -> None:
        if t not in self.parents:
            raise UnknownNode(t)

    def range_of(self, t: Term) -> ValueRange:
        self._check(t)
        return self.cpt[t].consequent_range

    @property
    def evidence_dict(self) -> dict[Term, str]:
        return dict(self.evidence)

    def edges(self) -> list[tuple[Term, Term]]:
        return [(p, n) for n in self.nodes for p in self.parents[n]]

    def parents_of(self, t: Term) -> tuple[Term, ...]:
        self._check(t)
        return self.parents[t]

    def children_of(self, t: Term) -> tuple[Term, ...]:
        self._check(t)
        return self._children[t]

    def _closure(self, t: Term, step) -> set[Term]:
        self._check(t)
        seen: set[Term] = set()
        stack = list(step(t))
        while stack:
            n = stack.pop()
            if n not in seen:
                seen.add(n)
                stack.extend(step(n))
        return seen

    def predecessors(self, t: Term) -> set[Term]:
        return self._closure(t, self.parents.__getitem__)

    def successors(self, t: Term) -> set[Term]:
        return self._closure(t, self._children.__getitem__)

    def roots(self) -> set[Term]:
        return {n for n in self.nodes if not self.parents[n]}

    def leaves(self) -> set[Term]:
        return {n for n in self.nodes if not self._children[n]}

    def is_path(self, f: Term, g: Term) -> bool:
        """True when f and g are connected by edges taken in either direction."""
        if f == g:
            self._check(f)
            return False
        return g in self._closure(f, lambda n: self.parents[n] + self._children[n])

    def with_node(self, term: Term, parents: Sequence[Term], matrix: LinkMatrix, rule_id: str = "") -> "GroundNetwork":
        """A copy with one extra node appended below ``parents``."""
        return GroundNetwork(
            self.nodes + (term,),
            {**self.parents, term: tuple(parents)},
            {**self.cpt, term: matrix},
            self.query,
            self.evidence,
            {**self.rule_of, term: rule_id},
        )

    def with_cpts(self, cpts: Mapping[Term, LinkMatrix]) -> "GroundNetwork":
        return GroundNetwork(self.nodes, self.parents, {**self.cpt, **cpts}, self.query, self.evidence, self.rule_of)

    def with_evidence(self, query: Term, evidence: Evidence) -> "GroundNetwork":
        return GroundNetwork(self.nodes, self.parents, self.cpt, query, tuple(evidence), self.rule_of)


def find_rule_for(kb: KnowledgeBase, g: Term) -> tuple[Rule, dict[str, str]]:
    for r in kb.rules:
        b = match(r.consequent, g)
        if b is not None:
            return r, b
    raise MissingRule(g)


class NetworkDraft:
    """Mutable accumulator filled by :func:`backward_chain`."""

    def __init__(self):
        self.nodes: list[Term] = []
        self.instances: dict[Term, GroundRuleInstance] = {}

    def __contains__(self, t: Term) -> bool:
        return t in self.instances

    def freeze(self, query: Term, evidence: Evidence = ()) -> GroundNetwork:
        return GroundNetwork(
            tuple(self.nodes),
            {n: self.instances[n].antecedents for n in self.nodes},
            {n: self.instances[n].matrix for n in self.nodes},
            query,
            tuple(evidence),
            {n: self.instances[n].rule_id for n in self.nodes},
        )


def backward_chain(kb: KnowledgeBase, g: Term, net: Optional[NetworkDraft] = None) -> NetworkDraft:
    """Add ``g`` and all its predecessors to ``net``, reusing nodes already there."""
    if net is None:
        net = NetworkDraft()
    if not g.is_ground:
        raise ValueError(f"{g} is not ground")
    if g in net:
        return net
    # Iterative DFS; a term is appended to net.nodes once all its antecedents are in place.
    on_stack: dict[Term, GroundRuleInstance] = {}
    path: list[Term] = []
    stack: list[tuple[Term, int]] = [(g, 0)]
    while stack:
        t, i = stack.pop()
        if i == 0:
            rule, binding = find_rule_for(kb, t)
            on_stack[t] = rule_ground_instance(rule, binding)
            path.append(t)
        inst = on_stack[t]
        if i < len(inst.antecedents):
            stack.append((t, i + 1))
            a = inst.antecedents[i]
            if a in net:
                continue
            if a in on_stack:
                raise CycleDetected(path[path.index(a):] + [a])
            stack.append((a, 0))
        else:
            path.pop()
            del on_stack[t]
            net.instances[t] = inst
            net.nodes.append(t)
    return net


def generate_network(kb: KnowledgeBase, query: Term, evidence: Evidence = ()) -> GroundNetwork:
    for t, v in evidence:
        if not kb.has_symbol(t.functor):
            raise MissingRule(t)
        rng = kb.range_of(t)
        if v not in rng.values:
            raise EvidenceValueOutOfRange(f"{v!r} is not a value of {t} (range {rng.name})")
    net = backward_chain(kb, query)
    for t, _ in evidence:
        backward_chain(kb, t, net)
    return net.freeze(query, evidence)


def find_cycle(parents: Mapping[Term, Iterable[Term]]) -> Optional[list[Term]]:
    """Return one directed cycle (first node repeated at the end) or None."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in parents}
    for start in sorted(parents, key=str):
        if color[start] != WHITE:
            continue
        stack = [(start, iter(parents[start]))]
        color[start] = GREY
        trail = [start]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                trail.pop()
                color[node] = BLACK
            elif color.get(nxt, BLACK) == GREY:
                cyc = trail[trail.index(nxt):] + [nxt]
                return list(reversed(cyc))
            elif color.get(nxt) == WHITE:
                color[nxt] = GREY
                trail.append(nxt)
                stack.append((nxt, iter(parents[nxt])))
    return None


def topological_levels(net: GroundNetwork) -> dict[Term, int]:
    """Leaves get level 0; every other node one more than its highest direct successor."""
    cyc = find_cycle(net.parents)
    if cyc is not None:
        raise CycleDetected(cyc)
    level: dict[Term, int] = {}
    remaining = {n: len(net.children_of(n)) for n in net.nodes}
    frontier = [n for n, k in remaining.items() if k == 0]
    for n in frontier:
        level[n] = 0
    while frontier:
        nxt = []
        for n in frontier:
            for p in net.parents[n]:
                level[p] = max(level.get(p, 0), level[n] + 1)
                remaining[p] -= 1
                if remaining[p] == 0:
                    nxt.append(p)
        frontier = nxt
    return level


def chain_rule_order(net: GroundNetwork) -> list[Term]:
    """Nodes by ascending level, ties by name: each node precedes all its predecessors."""
    level = topological_levels(net)
    return sorted(net.nodes, key=lambda n: (level[n], str(n)))


def _q(t) -> str:
    return '"' + str(t).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(net: GroundNetwork) -> str:
    evidence = net.evidence_dict
    lines = [f"digraph {_q('network')} {{"]
    for n in sorted(net.nodes, key=str):
        if n == net.query:
            lines.append(f"  {_q(n)} [shape=ellipse, style=bold];")
        elif n in evidence:
            lines.append(f"  {_q(n)} [shape=box, label={_q(f'{n}={evidence[n]}')}];")
        else:
            lines.append(f"  {_q(n)};")
    for p, c in sorted(net.edges(), key=lambda e: (str(e[0]), str(e[1]))):
        lines.append(f"  {_q(p)} -> {_q(c)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def network_to_dict(net: GroundNetwork) -> dict:
    order = chain_rule_order(net)
    order.reverse()
    nodes = []
    for n in order:
        m = net.cpt[n]
        nodes.append(
            {
                "term": str(n),
                "rule": net.rule_of.get(n, ""),
                "range": m.consequent_range.name,
                "values": list(m.consequent_range.values),
                "parents": [str(p) for p in net.parents[n]],
                "cpt": [list(row) for row in m.rows],
            }
        )
    return {
        "query": str(net.query),
        "evidence": [{"term": str(t), "value": v} for t, v in net.evidence],
        "nodes": nodes,
    }


def dump_network(net: GroundNetwork) -> str:
    return json.dumps(network_to_dict(net), indent=2)


def network_from_dict(data: dict) -> GroundNetwork:
    """Rebuild a network from :func:`network_to_dict` output (parents listed before children)."""
    from bkb.parser import _Reader

    def term(text: str) -> Term:
        t, _ = _Reader(text, "<dump>").term()
        return t

    nodes, parents, cpt, rule_of = [], {}, {}, {}
    ranges: dict[Term, ValueRange] = {}
    for rec in data["nodes"]:
        t = term(rec["term"])
        rng = ValueRange(rec["range"], tuple(rec["values"]))
        ps = tuple(term(p) for p in rec["parents"])
        nodes.append(t)
        ranges[t] = rng
        parents[t] = ps
        cpt[t] = LinkMatrix.from_rows(tuple(ranges[p] for p in ps), rng, rec["cpt"])
        rule_of[t] = rec.get("rule", "")
    evidence = tuple((term(e["term"]), e["value"]) for e in data.get("evidence", ()))
    return GroundNetwork(tuple(nodes), parents, cpt, term(data["query"]), evidence, rule_of)
