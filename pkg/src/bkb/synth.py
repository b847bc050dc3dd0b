"""Random knowledge bases, link matrices and networks for property checks.

All generators take an explicit :class:`random.Random` so runs are reproducible.
"""

from __future__ import annotations

import random
from typing import Optional, Sequence

from bkb.core import (
    FunctionSymbol,
    KnowledgeBase,
    LinkMatrix,
    Rule,
    Term,
    ValueRange,
    Variable,
)
from bkb.generator import GroundNetwork

BINARY = ValueRange("pm", ("+", "-"))
TERNARY = ValueRange("tri", ("lo", "mid", "hi"))


def random_row(rng: random.Random, k: int, zero_prob: float = 0.0) -> list[float]:
    """A probability vector of length k; entries are zeroed with probability ``zero_prob``."""
    while True:
        w = [0.0 if rng.random() < zero_prob else rng.random() + 1e-3 for _ in range(k)]
        s = sum(w)
        if s > 0:
            break
    row = [x / s for x in w]
    # absorb rounding so the row sums to 1 within a few ulps
    row[-1] = max(0.0, 1.0 - sum(row[:-1]))
    return row


def random_matrix(rng: random.Random, antecedent_ranges, consequent_range, zero_prob: float = 0.0) -> LinkMatrix:
    n_rows = 1
    for r in antecedent_ranges:
        n_rows *= len(r)
    rows = [random_row(rng, len(consequent_range), zero_prob) for _ in range(n_rows)]
    return LinkMatrix.from_rows(tuple(antecedent_ranges), consequent_range, rows)


def randomize_kb(kb: KnowledgeBase, rng: random.Random, zero_prob: float = 0.0) -> KnowledgeBase:
    """Same rules with freshly drawn link matrices."""
    return kb.replace_rules(
        Rule(r.id, r.consequent, r.antecedents, random_matrix(rng, r.matrix.antecedent_ranges, r.matrix.consequent_range, zero_prob))
        for r in kb.rules
    )


def randomize_network(net: GroundNetwork, rng: random.Random, zero_prob: float = 0.0) -> GroundNetwork:
    """Fresh link matrices; nodes from the same rule keep sharing one matrix."""
    by_rule: dict[str, LinkMatrix] = {}
    cpts = {}
    for n in sorted(net.nodes, key=str):
        m = net.cpt[n]
        key = net.rule_of.get(n) or f"node:{n}"
        if key not in by_rule:
            by_rule[key] = random_matrix(rng, m.antecedent_ranges, m.consequent_range, zero_prob)
        cpts[n] = by_rule[key]
    return net.with_cpts(cpts)


def random_kb(
    rng: random.Random,
    n_symbols: int = 6,
    max_parents: int = 3,
    ternary_prob: float = 0.2,
    arity_probs: Sequence[float] = (0.4, 0.45, 0.15),
) -> KnowledgeBase:
    """A random knowledge base satisfying C1-C4.

    Symbols are created in topological order, each defined by exactly one rule
    whose antecedents are drawn from earlier symbols. Arity-2 consequents use
    variables (x, y); antecedents use a subset of the consequent's variables.
    """
    symbols: list[FunctionSymbol] = []
    rules: list[Rule] = []
    for i in range(n_symbols):
        rngv = TERNARY if rng.random() < ternary_prob else BINARY
        arity = rng.choices((0, 1, 2), weights=arity_probs)[0]
        sym = FunctionSymbol(f"F{i}", arity, rngv)
        cvars = ("x", "y")[:arity]
        conse = Term(sym.name, tuple(Variable(v) for v in cvars))
        candidates = [s for s in symbols if s.arity <= arity]
        k = rng.randint(0, min(max_parents, len(candidates)))
        antes = []
        for parent in rng.sample(candidates, k):
            if parent.arity == 0:
                args = ()
            elif parent.arity == 1:
                args = (Variable(rng.choice(cvars)),)
            else:
                args = tuple(Variable(v) for v in rng.sample(cvars, 2))
            antes.append(Term(parent.name, args))
        matrix = random_matrix(rng, [s.range for s in (_sym(symbols, a) for a in antes)], rngv)
        rules.append(Rule(f"R{i}", conse, tuple(antes), matrix))
        symbols.append(sym)
    ranges = tuple(r for r in (BINARY, TERNARY) if any(s.range == r for s in symbols))
    return KnowledgeBase(ranges, tuple(symbols), tuple(rules))


def _sym(symbols: list[FunctionSymbol], t: Term) -> FunctionSymbol:
    return next(s for s in symbols if s.name == t.functor)


def random_ground_term(rng: random.Random, kb: KnowledgeBase, constants: Sequence[str] = ("A", "B")) -> Term:
    sym = rng.choice(kb.symbols)
    return Term.ground(sym.name, *(rng.choice(constants) for _ in range(sym.arity)))


def random_query_evidence(
    rng: random.Random, kb: KnowledgeBase, max_evidence: int = 3, constants: Sequence[str] = ("A", "B")
) -> tuple[Term, list[tuple[Term, str]]]:
    query = random_ground_term(rng, kb, constants)
    evidence: dict[Term, str] = {}
    for _ in range(rng.randint(0, max_evidence)):
        t = random_ground_term(rng, kb, constants)
        if t != query and t not in evidence:
            evidence[t] = rng.choice(kb.range_of(t).values)
    return query, list(evidence.items())


def network_from_edges(
    n_nodes: int,
    edges: Sequence[tuple[int, int]],
    rng: Optional[random.Random] = None,
    names: Optional[Sequence[str]] = None,
) -> GroundNetwork:
    """A binary network over zero-arity terms ``N0..N{n-1}`` with the given edges (i -> j)."""
    names = list(names or [f"N{i}" for i in range(n_nodes)])
    terms = [Term(n) for n in names]
    parents = {t: [] for t in terms}
    for i, j in edges:
        parents[terms[j]].append(terms[i])
    rng = rng or random.Random(0)
    cpt = {t: random_matrix(rng, [BINARY] * len(parents[t]), BINARY) for t in terms}
    return GroundNetwork(tuple(terms), parents, cpt, terms[0], (), {t: f"R_{t}" for t in terms})


def random_dag_edges(rng: random.Random, n_nodes: int, edge_prob: float) -> list[tuple[int, int]]:
    """Edges i -> j (i < j in a random permutation), each present with ``edge_prob``."""
    perm = list(range(n_nodes))
    rng.shuffle(perm)
    return [(perm[a], perm[b]) for a in range(n_nodes) for b in range(a + 1, n_nodes) if rng.random() < edge_prob]
