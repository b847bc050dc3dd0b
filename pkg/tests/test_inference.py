import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bkb import fixtures
from bkb.analysis import ExactOracle, posterior_oracle
from bkb.core import LinkMatrix, Term, ValueRange
from bkb.errors import UnknownTerm, ValidationFailed, ValueOutOfRange, ZeroEvidence
from bkb.generator import GroundNetwork
from bkb.inference import (
    Factor,
    min_degree_order,
    multiply,
    multiply_all,
    node_factor,
    posterior,
    restrict,
    sum_out,
    variable_elimination,
)
from bkb.synth import BINARY, TERNARY, network_from_edges, random_row, randomize_network

from conftest import HOLMES_EVIDENCE, T

A, B, C, D = (Term(n) for n in "ABCD")


def copy_factor():
    return Factor((A, B), (BINARY, BINARY), (1.0, 0.0, 0.0, 1.0))


def test_restrict_examples():
    f = restrict(copy_factor(), A, "+")
    assert f.scope == (B,) and f.table == (1.0, 0.0)
    prior = Factor((A,), (BINARY,), (0.3, 0.7))
    s = restrict(prior, A, "-")
    assert s.scope == () and s.table == (0.7,)
    with pytest.raises(UnknownTerm):
        restrict(prior, B, "+")
    with pytest.raises(ValueOutOfRange):
        restrict(prior, A, "?")


def random_factor(rng, scope, ranges):
    n = math.prod(len(r) for r in ranges)
    return Factor(scope, ranges, [rng.random() for _ in range(n)])


@pytest.mark.parametrize("seed", range(10))
def test_restrict_and_sum_out_commute(seed):
    rng = random.Random(seed)
    f = random_factor(rng, (A, B, C), (BINARY, TERNARY, BINARY))
    for v in TERNARY.values:
        one = sum_out(restrict(f, B, v), A)
        two = restrict(sum_out(f, A), B, v)
        assert one.scope == two.scope
        assert one.table == pytest.approx(two.table, abs=1e-15)


def test_restrict_middle_variable_by_brute_force():
    rng = random.Random(1)
    f = random_factor(rng, (A, B, C), (BINARY, TERNARY, BINARY))
    g = restrict(f, B, "mid")
    for a in BINARY.values:
        for c in BINARY.values:
            assert g.value({A: a, C: c}) == f.value({A: a, B: "mid", C: c})


def test_multiply_and_sum_out_by_brute_force():
    rng = random.Random(2)
    f = random_factor(rng, (A, B), (BINARY, TERNARY))
    g = random_factor(rng, (B, C), (TERNARY, BINARY))
    h = multiply(f, g)
    assert h.scope == (A, B, C)
    for a in BINARY.values:
        for b in TERNARY.values:
            for c in BINARY.values:
                assert h.value({A: a, B: b, C: c}) == f.value({A: a, B: b}) * g.value({B: b, C: c})
    s = sum_out(h, B)
    for a in BINARY.values:
        for c in BINARY.values:
            expected = math.fsum(h.value({A: a, B: b, C: c}) for b in TERNARY.values)
            assert s.value({A: a, C: c}) == pytest.approx(expected, abs=1e-15)


def test_multiply_identity_and_prior_sums_to_one():
    rng = random.Random(3)
    f = random_factor(rng, (A, B), (BINARY, TERNARY))
    ones = Factor((B,), (TERNARY,), (1.0, 1.0, 1.0))
    assert multiply(f, ones).table == f.table
    prior = Factor((A,), (BINARY,), tuple(random_row(rng, 2)))
    assert sum_out(prior, A).table == pytest.approx((1.0,), abs=1e-15)
    with pytest.raises(UnknownTerm):
        sum_out(prior, B)


@pytest.mark.parametrize("seed", range(5))
def test_full_product_matches_oracle_total(seed):
    rng = random.Random(seed)
    net = network_from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)], rng=rng)
    f = multiply_all(node_factor(net, n) for n in net.nodes)
    for n in net.nodes:
        f = sum_out(f, n)
    assert f.scope == ()
    assert abs(f.table[0] - 1.0) <= 1e-9
    assert abs(f.table[0] - ExactOracle(net).total()) <= 1e-9


def test_ve_single_node():
    net = GroundNetwork((A,), {A: ()}, {A: LinkMatrix((), BINARY, (0.3, 0.7))}, A)
    post = variable_elimination(net)
    assert post.probs == (0.3, 0.7) and post.evidence_probability == 1.0


def test_ve_deterministic_back_inference():
    copy = LinkMatrix((BINARY,), BINARY, (1.0, 0.0, 0.0, 1.0))
    net = GroundNetwork((A, B), {A: (), B: (A,)}, {A: LinkMatrix((), BINARY, (0.5, 0.5)), B: copy}, A, ((B, "+"),))
    post = variable_elimination(net)
    assert post.prob("+") == 1.0 and post.evidence_probability == 0.5


def test_ve_zero_evidence():
    copy = LinkMatrix((BINARY,), BINARY, (1.0, 0.0, 0.0, 1.0))
    net = GroundNetwork((A, B), {A: (), B: (A,)}, {A: LinkMatrix((), BINARY, (1.0, 0.0)), B: copy}, A, ((B, "-"),))
    with pytest.raises(ZeroEvidence):
        variable_elimination(net)
    assert posterior_oracle(net) is None


@pytest.mark.parametrize("seed", range(10))
def test_ve_matches_oracle_on_holmes(holmes_net, seed):
    net = randomize_network(holmes_net, random.Random(seed))
    post = variable_elimination(net)
    expected = posterior_oracle(net)
    for v, p in post.as_dict().items():
        assert abs(p - expected[v]) <= 1e-9
    given = net.evidence_dict
    p_e = math.fsum(ExactOracle(net).marginal_table([], given).values())
    assert abs(post.evidence_probability - p_e) <= 1e-12


def test_elimination_orders_agree(holmes_net):
    for seed in range(10):
        net = randomize_network(holmes_net, random.Random(seed))
        a = variable_elimination(net, "min-degree")
        b = variable_elimination(net, "reverse-lex")
        assert all(abs(x - y) <= 1e-9 for x, y in zip(a.probs, b.probs))


def test_explicit_order_must_cover_hidden_nodes(holmes_net):
    with pytest.raises(ValueError):
        variable_elimination(holmes_net, [Term("Quake")])
    with pytest.raises(ValueError):
        variable_elimination(holmes_net, "random")


def test_min_degree_order_is_deterministic(holmes_net):
    hidden = [n for n in holmes_net.nodes if n != holmes_net.query and n not in holmes_net.evidence_dict]
    order = min_degree_order(holmes_net, hidden, holmes_net.evidence_dict)
    assert sorted(order, key=str) == sorted(hidden, key=str)
    assert [str(t) for t in order] == ["Neighborhood(Holmes)", "Alarm(Holmes)", "Quake"]


def test_barren_node_does_not_change_posterior(holmes_net):
    rng = random.Random(5)
    net = randomize_network(holmes_net, rng)
    alarm = T("Alarm(Holmes)")
    extra = net.with_node(T("Siren(Holmes)"), [alarm], LinkMatrix.from_rows((BINARY,), BINARY, [random_row(rng, 2) for _ in range(2)]))
    a, b = variable_elimination(net), variable_elimination(extra)
    assert all(abs(x - y) <= 1e-9 for x, y in zip(a.probs, b.probs))


def test_posterior_pipeline(burglary_text):
    post, net = posterior(burglary_text, "Burglary(Holmes)", HOLMES_EVIDENCE)
    assert post.values == ("+", "-") and len(net) == 9
    assert abs(sum(post.probs) - 1.0) <= 1e-9
    assert 0.0 < post.evidence_probability <= 1.0
    expected = posterior_oracle(net)
    assert all(abs(post.prob(v) - expected[v]) <= 1e-9 for v in post.values)


def test_posterior_query_is_evidence(burglary_kb):
    post, _ = posterior(burglary_kb, "Quake", "Quake=m, Radio=+")
    assert post.as_dict() == {"t": 0.0, "m": 1.0, "s": 0.0}
    # P(Quake=m, Radio=+) = 0.08 * 0.6
    assert post.evidence_probability == pytest.approx(0.08 * 0.6, abs=1e-15)


def test_posterior_root_prior(burglary_kb):
    post, net = posterior(burglary_kb, "Quake")
    assert post.as_dict() == pytest.approx({"t": 0.9, "m": 0.08, "s": 0.02}, abs=1e-15)


def test_posterior_rejects_invalid_kb():
    with pytest.raises(ValidationFailed) as e:
        posterior(fixtures.read("shared_consequent.bkb"), "g(A)")
    assert e.value.report.constraints() == {"C3"}


def test_posterior_text_and_record(burglary_kb):
    post, _ = posterior(burglary_kb, "Quake", "Radio=+")
    lines = post.to_text().splitlines()
    assert lines[0] == "P(Quake | evidence)"
    assert [l.split(":")[0] for l in lines[1:4]] == ["t", "m", "s"]
    assert float(lines[1].split(": ")[1]) == post.prob("t")
    rec = post.to_dict()
    assert set(rec) == {"query", "posterior", "evidence_probability"}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_ve_matches_oracle_on_random_dags(seed):
    from bkb.synth import random_dag_edges

    rng = random.Random(seed)
    n = rng.randint(1, 8)
    net = network_from_edges(n, random_dag_edges(rng, n, 0.4), rng=rng)
    others = [t for t in net.nodes if t != net.query]
    evidence = [(t, rng.choice("+-")) for t in rng.sample(others, rng.randint(0, len(others)))]
    net = net.with_evidence(net.query, evidence)
    expected = posterior_oracle(net)
    try:
        post = variable_elimination(net)
    except ZeroEvidence:
        assert expected is None
        return
    assert all(abs(post.prob(v) - expected[v]) <= 1e-9 for v in post.values)
