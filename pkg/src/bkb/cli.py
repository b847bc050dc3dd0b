"""Command-line interface: ``bkb validate|query|dsep|export|oracle-check``.

Exit codes: 0 success, 1 validation failure (or a failed oracle check),
2 parse or I/O error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path
from typing import Optional, Sequence

from bkb.analysis import check_oracle_size, d_separation_report, posterior_oracle
from bkb.core import KnowledgeBase, Term
from bkb.errors import BKBError, CycleDetected, ParseError, ParseErrorKind, SourceSpan, ZeroEvidence
from bkb.generator import GroundNetwork, dump_network, export_dot, find_cycle, generate_network
from bkb.inference import variable_elimination
from bkb.parser import parse_bqe, parse_evidence, parse_kb, parse_query
from bkb.synth import randomize_network
from bkb.validator import validate

log = logging.getLogger("bkb")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARSE = 2
EXIT_RUNTIME = 3


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        self.code = code
        self.message = message


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise _Exit(EXIT_PARSE, f"cannot read {path}: {e.strerror or e}") from None


def _load_kb(path: str) -> KnowledgeBase:
    return parse_kb(_read(path), source=path)


def _emit(args, text: str, record: dict) -> None:
    if args.format == "json":
        print(json.dumps(record, indent=2))
    else:
        print(text)


def _checked_kb(args) -> KnowledgeBase:
    kb = _load_kb(args.kb)
    report = validate(kb)
    if not report.ok:
        if not args.force:
            raise _Exit(EXIT_INVALID, report.to_text())
        log.warning("knowledge base is invalid; continuing because of --force")
    return kb


def _query_and_evidence(args, kb: KnowledgeBase) -> tuple[Term, list[tuple[Term, str]]]:
    query: Optional[Term] = None
    evidence: dict[Term, str] = {}
    if args.bqe:
        query, items = parse_bqe(_read(args.bqe), kb, source=args.bqe)
        evidence.update(items)
    if args.query:
        q = parse_query(args.query, kb)
        if query is not None and q != query:
            raise ParseError(ParseErrorKind.DUPLICATE_NAME, f"query {q} conflicts with {query} in {args.bqe}", SourceSpan("<query>", 1, 1))
        query = q
    for i, text in enumerate(args.evidence or ()):
        for t, v in parse_evidence(text, kb, source=f"<evidence #{i + 1}>"):
            if evidence.get(t, v) != v:
                raise ParseError(
                    ParseErrorKind.DUPLICATE_NAME,
                    f"conflicting evidence for {t}: {evidence[t]} and {v}",
                    SourceSpan(f"<evidence #{i + 1}>", 1, 1),
                )
            evidence[t] = v
    if query is None:
        raise _Exit(EXIT_PARSE, "no query given (positional QUERY or a query: line in --bqe)")
    return query, list(evidence.items())


def _network(args) -> tuple[KnowledgeBase, GroundNetwork]:
    kb = _checked_kb(args)
    query, evidence = _query_and_evidence(args, kb)
    net = generate_network(kb, query, evidence)
    if getattr(args, "c4_ground", False):
        cyc = find_cycle(net.parents)
        if cyc is not None:
            raise CycleDetected(cyc)
        log.info("generated network is acyclic")
    if getattr(args, "dump_net", None):
        Path(args.dump_net).write_text(dump_network(net) + "\n", encoding="utf-8")
    if getattr(args, "dot", None):
        Path(args.dot).write_text(export_dot(net), encoding="utf-8")
    return kb, net


def cmd_validate(args) -> int:
    kb = _load_kb(args.kb)
    report = validate(kb)
    _emit(args, report.to_text(), report.to_dict())
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_query(args) -> int:
    _, net = _network(args)
    post = variable_elimination(net)
    record = post.to_dict()
    record["nodes"] = len(net)
    _emit(args, post.to_text(), record)
    return EXIT_OK


def _term_list(kb: KnowledgeBase, items: Optional[Sequence[str]]) -> list[Term]:
    return [parse_query(s, kb, source="<term>") for s in items or ()]


def cmd_dsep(args) -> int:
    kb, net = _network(args)
    x, z, y = _term_list(kb, args.x), _term_list(kb, args.z), _term_list(kb, args.y)
    result = d_separation_report(net, x, z, y)
    _emit(args, result.to_text(), result.to_dict())
    return EXIT_OK


def cmd_export(args) -> int:
    _, net = _network(args)
    if args.dot is None and args.dump_net is None:
        sys.stdout.write(export_dot(net))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    _, net = _network(args)
    check_oracle_size(net)
    worst = 0.0
    undefined = 0
    for i in range(args.seeds):
        filled = randomize_network(net, random.Random(args.seed + i))
        expected = posterior_oracle(filled)
        try:
            post = variable_elimination(filled)
        except ZeroEvidence:
            post = None
        if (post is None) != (expected is None):
            worst = float("inf")
            continue
        if post is None:
            undefined += 1
            continue
        for v, p in zip(post.values, post.probs):
            worst = max(worst, abs(p - expected[v]))
    ok = worst <= args.tol
    text = f"{'PASS' if ok else 'FAIL'}: {args.seeds} seeds, max |VE - oracle| = {worst:.3e} (tol {args.tol:g})"
    if undefined:
        text += f", {undefined} seed(s) with zero-probability evidence"
    _emit(args, text, {"ok": ok, "seeds": args.seeds, "max_deviation": worst, "tol": args.tol, "zero_evidence_seeds": undefined})
    return EXIT_OK if ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bkb", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_query=True):
        sp.add_argument("kb", help="knowledge base (.bkb)")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        if with_query:
            sp.add_argument("query", nargs="?", help="ground query term, e.g. 'Burglary(Holmes)'")
            sp.add_argument("-e", "--evidence", action="append", metavar="TERM=VALUE", help="evidence; repeatable")
            sp.add_argument("--bqe", help="query/evidence file")
            sp.add_argument("--force", action="store_true", help="run even if the knowledge base is invalid")
            sp.add_argument("--c4-ground", action="store_true", help="also check the generated network for cycles")
            sp.add_argument("--dump-net", metavar="PATH", help="write the network as JSON")
            sp.add_argument("--dot", metavar="PATH", help="write the network in DOT format")

    sp = sub.add_parser("validate", help="check constraints C1-C4 and link matrices")
    common(sp, with_query=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("query", help="posterior of the query given the evidence")
    common(sp)
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("dsep", help="d-separation test on the generated network")
    common(sp)
    sp.add_argument("-x", action="append", metavar="TERM", help="member of X; repeatable")
    sp.add_argument("-z", action="append", metavar="TERM", help="member of Z; repeatable")
    sp.add_argument("-y", action="append", metavar="TERM", help="member of Y; repeatable")
    sp.set_defaults(func=cmd_dsep)

    sp = sub.add_parser("export", help="print the generated network in DOT format")
    common(sp)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("oracle-check", help="compare variable elimination with brute-force enumeration")
    common(sp)
    sp.add_argument("--seeds", type=int, default=50, help="number of random CPT fills")
    sp.add_argument("--seed", type=int, default=0, help="first seed")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.set_defaults(func=cmd_oracle_check)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except _Exit as e:
        if e.message:
            print(e.message, file=sys.stdout if e.code == EXIT_INVALID else sys.stderr)
        return e.code
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except BKBError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
