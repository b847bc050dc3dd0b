"""Well-formedness checks for knowledge bases (constraints C1-C4 and link matrices)."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx

from bkb.core import KnowledgeBase, Term, Variable

CONSTRAINTS = ("C1", "C2", "C3", "C4", "Matrix")


@dataclass(frozen=True)
class Violation:
    constraint: str
    rule_ids: tuple[str, ...]
    detail: str
    symbol: Optional[str] = None

    def to_dict(self) -> dict:
        d = {"constraint": self.constraint, "rule_ids": list(self.rule_ids), "detail": self.detail}
        if self.symbol is not None:
            d["symbol"] = self.symbol
        return d


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def constraints(self) -> set[str]:
        return {v.constraint for v in self.violations}

    def to_text(self) -> str:
        if self.ok:
            return "OK"
        lines = [f"{len(self.violations)} violation(s)"]
        for v in self.violations:
            who = ", ".join(v.rule_ids) if v.rule_ids else v.symbol
            lines.append(f"{v.constraint} [{who}]: {v.detail}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def check_c1(kb: KnowledgeBase) -> list[Violation]:
    """Every antecedent symbol must be the consequent symbol of some rule."""
    defined = {r.consequent.functor for r in kb.rules}
    users: dict[str, list[str]] = {}
    for r in kb.rules:
        for a in r.antecedents:
            if a.functor not in defined:
                users.setdefault(a.functor, [])
                if r.id not in users[a.functor]:
                    users[a.functor].append(r.id)
    return [
        Violation("C1", tuple(sorted(ids)), f"{sym} is used as an antecedent but no rule concludes it", symbol=sym)
        for sym, ids in sorted(users.items())
    ]


def check_c2(kb: KnowledgeBase) -> list[Violation]:
    out = []
    for r in kb.rules:
        free = set()
        for a in r.antecedents:
            free |= a.variables()
        free -= r.consequent.variables()
        if free:
            out.append(
                Violation(
                    "C2",
                    (r.id,),
                    f"antecedent variable(s) {', '.join(sorted(free))} missing from consequent {r.consequent}",
                )
            )
    return sorted(out, key=lambda v: v.rule_ids)


def unify_terms(a: Term, b: Term) -> Optional[dict]:
    """Two-sided unification of flat terms whose variables are standardized apart.

    Variables of ``a`` and ``b`` live in separate namespaces. Returns the most
    general unifier as a mapping from ``(side, name)`` to a constant name or
    another ``(side, name)`` key, or None when the terms clash.
    """
    if a.functor != b.functor or a.arity != b.arity:
        return None
    subst: dict = {}

    def key(side, arg):
        return (side, arg.name) if isinstance(arg, Variable) else arg

    def walk(x):
        while isinstance(x, tuple) and x in subst:
            x = subst[x]
        return x

    for x, y in zip(a.args, b.args):
        x, y = walk(key(0, x)), walk(key(1, y))
        if x == y:
            continue
        if isinstance(x, tuple):
            subst[x] = y
        elif isinstance(y, tuple):
            subst[y] = x
        else:
            return None  # two distinct constants
    return subst


def check_c3(kb: KnowledgeBase) -> list[Violation]:
    out = []
    rules = sorted(kb.rules, key=lambda r: r.id)
    for r1, r2 in itertools.combinations(rules, 2):
        if unify_terms(r1.consequent, r2.consequent) is not None:
            out.append(
                Violation(
                    "C3",
                    (r1.id, r2.id),
                    f"consequents {r1.consequent} and {r2.consequent} share ground instances",
                )
            )
    return out


def symbol_graph(kb: KnowledgeBase) -> nx.MultiDiGraph:
    g = nx.MultiDiGraph()
    for r in kb.rules:
        g.add_node(r.consequent.functor)
        for a in r.antecedents:
            g.add_edge(a.functor, r.consequent.functor, rule=r.id)
    return g


def check_c4(kb: KnowledgeBase) -> list[Violation]:
    """Report each strongly connected component of the symbol dependency graph that holds a cycle."""
    g = symbol_graph(kb)
    out = []
    for comp in nx.strongly_connected_components(g):
        sub = g.subgraph(comp)
        if len(comp) == 1 and not sub.number_of_edges():
            continue
        start = min(comp)
        cycle_edges = nx.find_cycle(sub, source=start)
        names = [cycle_edges[0][0]] + [e[1] for e in cycle_edges]
        rule_ids = sorted({d["rule"] for _, _, d in sub.edges(data=True)})
        out.append(Violation("C4", tuple(rule_ids), "cycle " + " -> ".join(names)))
    return sorted(out, key=lambda v: v.rule_ids)


def check_matrices(kb: KnowledgeBase) -> list[Violation]:
    out = []
    for r in sorted(kb.rules, key=lambda r: r.id):
        for problem in r.matrix.problems():
            out.append(Violation("Matrix", (r.id,), problem))
    return out


def validate(kb: KnowledgeBase) -> ValidationReport:
    violations = check_c1(kb) + check_c2(kb) + check_c3(kb) + check_c4(kb) + check_matrices(kb)
    return ValidationReport(tuple(violations))

