"""Independence structure and a brute-force probability oracle for ground networks.

``d_separated`` answers d-separation queries by directed reachability over
(node, direction) states. ``enumerate_paths`` and ``d_separated_by_paths``
evaluate the path-blocking definition literally and exist as a cross-check.

The oracle side (:class:`ExactOracle`) materializes the full joint table as
the product of each node's link-matrix entry, in chain-rule order, and answers
conditional and independence queries by summation. It refuses networks beyond
``MAX_ORACLE_NODES`` nodes or ``MAX_ORACLE_ASSIGNMENTS`` assignments.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from bkb.core import Term, matrix_lookup
from bkb.errors import IncompleteAssignment, OverlappingSets, SizeLimit, UnknownNode
from bkb.generator import GroundNetwork, chain_rule_order

MAX_ORACLE_NODES = 20
MAX_ORACLE_ASSIGNMENTS = 3_000_000
ZERO_SUPPORT = 1e-12
DEFAULT_TOL = 1e-9


def _check_triple(net: GroundNetwork, x, z, y) -> tuple[frozenset, frozenset, frozenset]:
    x, z, y = frozenset(x), frozenset(z), frozenset(y)
    for t in itertools.chain(x, z, y):
        if t not in net:
            raise UnknownNode(t)
    if x & y or x & z or y & z:
        raise OverlappingSets("X, Y and Z must be pairwise disjoint")
    return x, z, y


@dataclass(frozen=True)
class Path:
    """An undirected path; ``forward[i]`` tells whether the edge between nodes[i] and nodes[i+1] points forward."""

    nodes: tuple[Term, ...]
    forward: tuple[bool, ...]

    def converging(self) -> tuple[bool, ...]:
        """For each interior node, whether both path edges point into it."""
        return tuple(self.forward[i - 1] and not self.forward[i] for i in range(1, len(self.nodes) - 1))

    def __str__(self) -> str:
        out = [str(self.nodes[0])]
        for fwd, n in zip(self.forward, self.nodes[1:]):
            out.append(" -> " if fwd else " <- ")
            out.append(str(n))
        return "".join(out)


def enumerate_paths(net: GroundNetwork, f: Term, g: Term) -> list[Path]:
    """All simple paths between f and g, ignoring edge direction."""
    for t in (f, g):
        if t not in net:
            raise UnknownNode(t)
    if f == g:
        raise ValueError("path endpoints must differ")
    out: list[Path] = []

    def extend(nodes: list[Term], forward: list[bool], seen: set[Term]):
        last = nodes[-1]
        steps = [(c, True) for c in net.children_of(last)] + [(p, False) for p in net.parents_of(last)]
        for nxt, fwd in sorted(steps, key=lambda s: (str(s[0]), s[1])):
            if nxt in seen:
                continue
            if nxt == g:
                out.append(Path(tuple(nodes) + (g,), tuple(forward) + (fwd,)))
                continue
            seen.add(nxt)
            nodes.append(nxt)
            forward.append(fwd)
            extend(nodes, forward, seen)
            nodes.pop()
            forward.pop()
            seen.discard(nxt)

    extend([f], [], {f})
    return out


def path_blocked(net: GroundNetwork, path: Path, z: frozenset) -> bool:
    for w, conv in zip(path.nodes[1:-1], path.converging()):
        if conv:
            if w not in z and not (net.successors(w) & z):
                return True
        elif w in z:
            return True
    return False


def d_separated_by_paths(net: GroundNetwork, x: Iterable[Term], z: Iterable[Term], y: Iterable[Term]) -> bool:
    """Literal evaluation: every path from X to Y must contain a blocking term."""
    x, z, y = _check_triple(net, x, z, y)
    for a in sorted(x, key=str):
        for b in sorted(y, key=str):
            for p in enumerate_paths(net, a, b):
                if not path_blocked(net, p, z):
                    return False
    return True


def _active_trail(net: GroundNetwork, x: frozenset, z: frozenset, y: frozenset) -> Optional[list[tuple[Term, bool]]]:
    """Search for an active trail from X to Y given Z.

    States are (node, arrived_from_child). Returns the trail as (node, arrived_from_child)
    pairs, or None if every trail is blocked.
    """
    # Z together with its ancestors: a collider is open iff it is in this set.
    opens_collider = set(z)
    for t in z:
        opens_collider |= net.predecessors(t)

    start = [(s, True) for s in sorted(x, key=str)]
    back: dict[tuple[Term, bool], Optional[tuple[Term, bool]]] = {s: None for s in start}
    queue = deque(start)
    while queue:
        state = queue.popleft()
        node, up = state
        if node in y:
            trail = []
            while state is not None:
                trail.append(state)
                state = back[state]
            return trail[::-1]
        nxt = []
        if up and node not in z:
            nxt += [(p, True) for p in net.parents_of(node)]
            nxt += [(c, False) for c in net.children_of(node)]
        elif not up:
            if node not in z:
                nxt += [(c, False) for c in net.children_of(node)]
            if node in opens_collider:
                nxt += [(p, True) for p in net.parents_of(node)]
        for s in nxt:
            if s not in back:
                back[s] = state
                queue.append(s)
    return None


def d_separated(net: GroundNetwork, x: Iterable[Term], z: Iterable[Term], y: Iterable[Term]) -> bool:
    """Whether Z d-separates X from Y in ``net``."""
    x, z, y = _check_triple(net, x, z, y)
    return _active_trail(net, x, z, y) is None


@dataclass(frozen=True)
class DSepResult:
    x: tuple[Term, ...]
    z: tuple[Term, ...]
    y: tuple[Term, ...]
    separated: bool
    witness: Optional[Path]

    def to_dict(self) -> dict:
        return {
            "X": [str(t) for t in self.x],
            "Z": [str(t) for t in self.z],
            "Y": [str(t) for t in self.y],
            "d_separated": self.separated,
            "witness": None if self.witness is None else str(self.witness),
        }

    def to_text(self) -> str:
        if self.separated:
            blockers = ", ".join(map(str, self.z)) or "(empty set)"
            return f"true\nblocked by: {blockers}"
        return f"false\nactive path: {self.witness}"


def d_separation_report(net: GroundNetwork, x, z, y) -> DSepResult:
    """d-separation verdict plus an active path as witness when the sets are connected."""
    xs, zs, ys = _check_triple(net, x, z, y)
    trail = _active_trail(net, xs, zs, ys)
    witness = None
    if trail is not None:
        nodes = tuple(t for t, _ in trail)
        # arrived_from_child=False means the edge pointed forward into the node
        forward = tuple(not up for _, up in trail[1:])
        witness = Path(nodes, forward)
    key = lambda s: sorted(s, key=str)  # noqa: E731
    return DSepResult(tuple(key(xs)), tuple(key(zs)), tuple(key(ys)), trail is None, witness)


def _table_size(net: GroundNetwork) -> int:
    return math.prod(len(net.range_of(n)) for n in net.nodes)


def check_oracle_size(net: GroundNetwork) -> None:
    if len(net) > MAX_ORACLE_NODES:
        raise SizeLimit(f"network has {len(net)} nodes; the oracle enumerates at most {MAX_ORACLE_NODES}")
    size = _table_size(net)
    if size > MAX_ORACLE_ASSIGNMENTS:
        raise SizeLimit(f"network has {size} joint assignments; the oracle enumerates at most {MAX_ORACLE_ASSIGNMENTS}")


def joint_oracle(net: GroundNetwork, assignment: Mapping[Term, str], order: Optional[Sequence[Term]] = None) -> float:
    """Probability of a complete assignment: the product of every node's link-matrix entry.

    ``order`` is the chain-rule order; pass it when summing over many assignments.
    """
    missing = [n for n in net.nodes if n not in assignment]
    if missing:
        raise IncompleteAssignment("assignment does not cover " + ", ".join(map(str, missing)))
    p = 1.0
    for n in order or chain_rule_order(net):
        p *= matrix_lookup(net.cpt[n], [assignment[q] for q in net.parents[n]], assignment[n])
    return p


def assignments(net: GroundNetwork) -> Iterator[dict[Term, str]]:
    check_oracle_size(net)
    order = list(net.nodes)
    for values in itertools.product(*(net.range_of(n).values for n in order)):
        yield dict(zip(order, values))


class ExactOracle:
    """Full joint table of a network, computed once by enumeration.

    Probabilities are products of link-matrix entries taken in chain-rule
    order; conditionals are ratios of sums over that table.
    """

    def __init__(self, net: GroundNetwork):
        check_oracle_size(net)
        self.net = net
        self.order = chain_rule_order(net)
        self.pos = {n: i for i, n in enumerate(self.order)}
        cards = [len(net.range_of(n)) for n in self.order]
        # Per node: flat CPT, own cardinality, and (position, stride) of each parent.
        plan = []
        for n in self.order:
            m = net.cpt[n]
            strides = []
            s = 1
            for p in reversed(net.parents[n]):
                strides.append((self.pos[p], s))
                s *= len(net.range_of(p))
            plan.append((m.entries, cards[self.pos[n]], self.pos[n], tuple(reversed(strides))))
        self.states: list[tuple[int, ...]] = []
        self.probs: list[float] = []
        for combo in itertools.product(*(range(c) for c in cards)):
            p = 1.0
            for entries, card, own, strides in plan:
                row = 0
                for pos, stride in strides:
                    row += combo[pos] * stride
                p *= entries[row * card + combo[own]]
            self.states.append(combo)
            self.probs.append(p)

    def _index(self, t: Term) -> int:
        if t not in self.pos:
            raise UnknownNode(t)
        return self.pos[t]

    def total(self) -> float:
        return math.fsum(self.probs)

    def marginal_table(self, terms: Sequence[Term], given: Optional[Mapping[Term, str]] = None) -> dict[tuple[str, ...], float]:
        """Unnormalized P(terms, given) for each value combination of ``terms``."""
        idx = [self._index(t) for t in terms]
        cond = [(self._index(t), self.net.range_of(t).index(v)) for t, v in (given or {}).items()]
        acc: dict[tuple[int, ...], list[float]] = {}
        for combo, p in zip(self.states, self.probs):
            if all(combo[i] == v for i, v in cond):
                acc.setdefault(tuple(combo[i] for i in idx), []).append(p)
        labels = [self.net.range_of(t).values for t in terms]
        out = {}
        for combo in itertools.product(*(range(len(v)) for v in labels)):
            out[tuple(lab[c] for lab, c in zip(labels, combo))] = math.fsum(acc.get(combo, ()))
        return out

    def marginal(self, targets: Sequence[Term], given: Optional[Mapping[Term, str]] = None) -> Optional[dict[tuple[str, ...], float]]:
        """P(targets | given), or None when P(given) is (numerically) zero."""
        given = dict(given or {})
        if set(targets) & set(given):
            raise OverlappingSets("targets and conditioning terms overlap")
        table = self.marginal_table(targets, given)
        z = math.fsum(table.values())
        if z <= ZERO_SUPPORT:
            return None
        return {k: v / z for k, v in table.items()}

    def independent(self, x: Iterable[Term], y: Iterable[Term], z: Iterable[Term], tol: float = DEFAULT_TOL) -> bool:
        return self.ci_witness(x, y, z, tol) is None

    def ci_witness(self, x, y, z, tol: float = DEFAULT_TOL) -> Optional[dict]:
        """First value combination violating X _|_ Y | Z beyond ``tol``, or None."""
        xs, zs, ys = _check_triple(self.net, x, z, y)
        xs, ys, zs = sorted(xs, key=str), sorted(ys, key=str), sorted(zs, key=str)
        joint = self.marginal_table(xs + ys + zs)
        nx_, ny = len(xs), len(ys)
        p_yz: dict = {}
        p_xz: dict = {}
        p_z: dict = {}
        for key, p in joint.items():
            u, v, w = key[:nx_], key[nx_ : nx_ + ny], key[nx_ + ny :]
            p_yz.setdefault((v, w), []).append(p)
            p_xz.setdefault((u, w), []).append(p)
            p_z.setdefault(w, []).append(p)
        p_yz = {k: math.fsum(v) for k, v in p_yz.items()}
        p_xz = {k: math.fsum(v) for k, v in p_xz.items()}
        p_z = {k: math.fsum(v) for k, v in p_z.items()}
        for key, p in joint.items():
            u, v, w = key[:nx_], key[nx_ : nx_ + ny], key[nx_ + ny :]
            if p_yz[(v, w)] <= ZERO_SUPPORT:
                continue
            lhs = p / p_yz[(v, w)]
            rhs = p_xz[(u, w)] / p_z[w]
            if abs(lhs - rhs) > tol:
                return {
                    "X": dict(zip(map(str, xs), u)),
                    "Y": dict(zip(map(str, ys), v)),
                    "Z": dict(zip(map(str, zs), w)),
                    "given_xyz": lhs,
                    "given_z": rhs,
                }
        return None


def marginal_oracle(net: GroundNetwork, targets: Sequence[Term], given: Optional[Mapping[Term, str]] = None):
    return ExactOracle(net).marginal(list(targets), given)


def ci_oracle(net: GroundNetwork, x, y, z, tol: float = DEFAULT_TOL) -> bool:
    """Whether X is independent of Y given Z under the network's distribution."""
    return ExactOracle(net).independent(x, y, z, tol)


def markov_check(net: GroundNetwork, tol: float = DEFAULT_TOL, oracle: Optional[ExactOracle] = None) -> list[tuple[Term, Term]]:
    """Pairs (t, u) where t is not independent of non-successor u given t's parents."""
    oracle = oracle or ExactOracle(net)
    failures = []
    for t in sorted(net.nodes, key=str):
        pa = set(net.parents_of(t))
        desc = net.successors(t)
        for u in sorted(net.nodes, key=str):
            if u == t or u in pa or u in desc:
                continue
            if not oracle.independent({t}, {u}, pa, tol):
                failures.append((t, u))
    return failures


def posterior_oracle(net: GroundNetwork, oracle: Optional[ExactOracle] = None) -> Optional[dict[str, float]]:
    """P(query = v | evidence) for each value v by enumeration, or None for zero-probability evidence."""
    oracle = oracle or ExactOracle(net)
    evidence = net.evidence_dict
    if net.query in evidence:
        p_e = math.fsum(oracle.marginal_table([], evidence).values())
        if p_e <= ZERO_SUPPORT:
            return None
        return {v: 1.0 if v == evidence[net.query] else 0.0 for v in net.range_of(net.query).values}
    dist = oracle.marginal([net.query], evidence)
    return None if dist is None else {k[0]: p for k, p in dist.items()}
