"""Reader and writer for the ``.bkb`` rule language and query/evidence text.

A knowledge base file looks like::

    range pm { +, - }
    var Alarm(x) : pm
    rule R2 { Alarm(x) | Burglary(x), Quake : cpt [ ... ] }

Inside rule, query and evidence terms an argument starting with a lowercase
letter or ``_`` is a variable; anything else is a constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional

from bkb.core import (
    ROW_SUM_TOL,
    Constant,
    FunctionSymbol,
    KnowledgeBase,
    LinkMatrix,
    Rule,
    Term,
    ValueRange,
    Variable,
)
from bkb.errors import ParseError, ParseErrorKind, SourceSpan

Kind = ParseErrorKind

_IDENT = re.compile(r"[A-Za-z0-9_+\-]+\Z")
_TOKEN = re.compile(r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)|(?P<punct>[{}()\[\],:|=])|(?P<word>[A-Za-z0-9_+\-.]+)")


@dataclass(frozen=True)
class Token:
    kind: str  # "punct", "word" or "eof"
    text: str
    line: int
    column: int


def _tokenize(text: str, source: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    if text.startswith("﻿"):
        pos = 1
        line_start = 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(Kind.SYNTAX, f"unexpected character {text[pos]!r}", SourceSpan(source, line, col))
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("punct", "word"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def is_variable_name(name: str) -> bool:
    return name[0].islower() or name[0] == "_"


class _Reader:
    def __init__(self, text: str, source: str):
        self.source = source
        self.tokens = _tokenize(text, source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def span(self, tok: Optional[Token] = None) -> SourceSpan:
        tok = tok or self.tok
        return SourceSpan(self.source, tok.line, tok.column)

    def fail(self, kind: Kind, message: str, tok: Optional[Token] = None):
        raise ParseError(kind, message, self.span(tok))

    def at(self, text: str) -> bool:
        return self.tok.kind == "punct" and self.tok.text == text

    def at_eof(self) -> bool:
        return self.tok.kind == "eof"

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(Kind.SYNTAX, f"expected {text!r}, found {self.describe()}")
        return self.advance()

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def ident(self, what: str = "identifier") -> Token:
        tok = self.tok
        if tok.kind != "word" or not _IDENT.match(tok.text):
            self.fail(Kind.SYNTAX, f"expected {what}, found {self.describe()}")
        return self.advance()

    def keyword(self, word: str) -> Token:
        if self.tok.kind != "word" or self.tok.text != word:
            self.fail(Kind.SYNTAX, f"expected {word!r}, found {self.describe()}")
        return self.advance()

    def describe(self) -> str:
        return "end of input" if self.at_eof() else repr(self.tok.text)

    def term(self) -> tuple[Term, Token]:
        head = self.ident("function symbol")
        args = []
        if self.accept("("):
            if not self.at(")"):
                while True:
                    a = self.ident("argument")
                    args.append(Variable(a.text) if is_variable_name(a.text) else Constant(a.text))
                    if not self.accept(","):
                        break
            self.expect(")")
        return Term(head.text, tuple(args)), head


def _check_term(r: _Reader, kb_symbols: dict[str, FunctionSymbol], t: Term, tok: Token) -> FunctionSymbol:
    sym = kb_symbols.get(t.functor)
    if sym is None:
        r.fail(Kind.UNKNOWN_SYMBOL, f"undeclared function symbol {t.functor}", tok)
    if sym.arity != t.arity:
        r.fail(Kind.ARITY_MISMATCH, f"{t.functor} takes {sym.arity} argument(s), got {t.arity}", tok)
    return sym


def parse_kb(text: str, source: str = "<string>") -> KnowledgeBase:
    """Parse a whole knowledge base; raises :class:`ParseError` on the first defect."""
    r = _Reader(text, source)
    ranges: dict[str, ValueRange] = {}
    symbols: dict[str, FunctionSymbol] = {}
    rules: dict[str, Rule] = {}

    while not r.at_eof():
        kw = r.tok
        if kw.kind == "word" and kw.text == "range":
            r.advance()
            name = r.ident("range name")
            if name.text in ranges:
                r.fail(Kind.DUPLICATE_NAME, f"range {name.text} declared twice", name)
            r.expect("{")
            values = [r.ident("value label")]
            while r.accept(","):
                values.append(r.ident("value label"))
            r.expect("}")
            if len(values) < 2:
                r.fail(Kind.SYNTAX, f"range {name.text} needs at least two values", name)
            seen = set()
            for v in values:
                if v.text in seen:
                    r.fail(Kind.DUPLICATE_NAME, f"value {v.text} repeated in range {name.text}", v)
                seen.add(v.text)
            ranges[name.text] = ValueRange(name.text, tuple(v.text for v in values))
        elif kw.kind == "word" and kw.text == "var":
            r.advance()
            name = r.ident("function symbol")
            if name.text in symbols:
                r.fail(Kind.DUPLICATE_NAME, f"function symbol {name.text} declared twice", name)
            r.expect("(")
            params = []
            if not r.at(")"):
                params.append(r.ident("parameter"))
                while r.accept(","):
                    params.append(r.ident("parameter"))
            r.expect(")")
            if len({p.text for p in params}) != len(params):
                r.fail(Kind.DUPLICATE_NAME, f"repeated parameter in declaration of {name.text}", name)
            r.expect(":")
            rng = r.ident("range name")
            if rng.text not in ranges:
                r.fail(Kind.UNKNOWN_SYMBOL, f"undeclared range {rng.text}", rng)
            symbols[name.text] = FunctionSymbol(name.text, len(params), ranges[rng.text])
        elif kw.kind == "word" and kw.text == "rule":
            r.advance()
            rid = r.ident("rule id")
            if rid.text in rules:
                r.fail(Kind.DUPLICATE_NAME, f"rule {rid.text} declared twice", rid)
            r.expect("{")
            conse, ctok = r.term()
            csym = _check_term(r, symbols, conse, ctok)
            antes: list[tuple[Term, FunctionSymbol]] = []
            if r.accept("|"):
                while True:
                    t, ttok = r.term()
                    antes.append((t, _check_term(r, symbols, t, ttok)))
                    if not r.accept(","):
                        break
            r.expect(":")
            r.keyword("cpt")
            open_tok = r.expect("[")
            entries = []
            while not r.at("]"):
                num = r.tok
                if num.kind != "word":
                    r.fail(Kind.SYNTAX, f"expected a probability, found {r.describe()}")
                try:
                    p = float(num.text)
                except ValueError:
                    r.fail(Kind.SYNTAX, f"{num.text!r} is not a number", num)
                if not math.isfinite(p) or not _looks_numeric(num.text):
                    r.fail(Kind.SYNTAX, f"{num.text!r} is not a decimal literal", num)
                if not 0.0 <= p <= 1.0:
                    r.fail(Kind.MATRIX_VALUE, f"probability {num.text} outside [0,1]", num)
                entries.append(p)
                r.advance()
                r.accept(",")
            r.expect("]")
            r.expect("}")
            matrix = LinkMatrix(tuple(s.range for _, s in antes), csym.range, tuple(entries))
            if len(entries) != matrix.expected_size:
                r.fail(
                    Kind.MATRIX_SHAPE,
                    f"rule {rid.text} needs {matrix.expected_size} matrix entries, got {len(entries)}",
                    open_tok,
                )
            for i, row in enumerate(matrix.rows):
                s = math.fsum(row)
                if abs(s - 1.0) > ROW_SUM_TOL:
                    r.fail(Kind.MATRIX_VALUE, f"rule {rid.text}: row {i} sums to {s!r}", open_tok)
            rules[rid.text] = Rule(rid.text, conse, tuple(t for t, _ in antes), matrix)
        else:
            r.fail(Kind.SYNTAX, f"expected 'range', 'var' or 'rule', found {r.describe()}")

    return KnowledgeBase(tuple(ranges.values()), tuple(symbols.values()), tuple(rules.values()))


_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")


def _looks_numeric(text: str) -> bool:
    return bool(_NUMBER.match(text))


def _ground_term(r: _Reader, kb: KnowledgeBase, what: str) -> Term:
    t, tok = r.term()
    if not kb.has_symbol(t.functor):
        r.fail(Kind.UNKNOWN_SYMBOL, f"undeclared function symbol {t.functor}", tok)
    sym = kb.symbol(t.functor)
    if sym.arity != t.arity:
        r.fail(Kind.ARITY_MISMATCH, f"{t.functor} takes {sym.arity} argument(s), got {t.arity}", tok)
    if not t.is_ground:
        r.fail(Kind.SYNTAX, f"{what} {t} must be ground (variables: {', '.join(sorted(t.variables()))})", tok)
    return t


def parse_query(text: str, kb: KnowledgeBase, source: str = "<query>") -> Term:
    r = _Reader(text, source)
    t = _ground_term(r, kb, "query")
    if not r.at_eof():
        r.fail(Kind.SYNTAX, f"unexpected {r.describe()} after query")
    return t


def _evidence_item(r: _Reader, kb: KnowledgeBase, out: dict[Term, str]) -> None:
    tok = r.tok
    t = _ground_term(r, kb, "evidence term")
    r.expect("=")
    vtok = r.ident("value")
    rng = kb.range_of(t)
    if vtok.text not in rng.values:
        r.fail(Kind.VALUE_OUT_OF_RANGE, f"{vtok.text} is not a value of {t} (range {rng.name})", vtok)
    prev = out.get(t)
    if prev is not None and prev != vtok.text:
        r.fail(Kind.DUPLICATE_NAME, f"conflicting evidence for {t}: {prev} and {vtok.text}", tok)
    out.setdefault(t, vtok.text)


def parse_evidence(text: str, kb: KnowledgeBase, source: str = "<evidence>") -> list[tuple[Term, str]]:
    """Parse ``TERM=VALUE`` items separated by commas or newlines.

    Exact duplicates collapse to one item; conflicting duplicates are an error.
    """
    r = _Reader(text, source)
    out: dict[Term, str] = {}
    while not r.at_eof():
        _evidence_item(r, kb, out)
        if not r.at_eof() and not r.accept(","):
            if r.tokens[r.i - 1].line == r.tok.line:
                r.fail(Kind.SYNTAX, f"expected ',' between evidence items, found {r.describe()}")
    return list(out.items())


def parse_bqe(text: str, kb: KnowledgeBase, source: str = "<bqe>") -> tuple[Optional[Term], list[tuple[Term, str]]]:
    """Parse a query/evidence file: ``query: TERM`` then ``evidence: TERM=VALUE`` lines."""
    r = _Reader(text, source)
    query = None
    evidence: dict[Term, str] = {}
    while not r.at_eof():
        kw = r.ident("'query' or 'evidence'")
        r.expect(":")
        if kw.text == "query":
            if query is not None:
                r.fail(Kind.DUPLICATE_NAME, "query given twice", kw)
            if evidence:
                r.fail(Kind.SYNTAX, "the query line must come first", kw)
            query = _ground_term(r, kb, "query")
        elif kw.text == "evidence":
            _evidence_item(r, kb, evidence)
        else:
            r.fail(Kind.SYNTAX, f"unknown directive {kw.text!r}", kw)
    return query, list(evidence.items())


def _fmt_prob(p: float) -> str:
    return format(p, ".17g")


def serialize_kb(kb: KnowledgeBase) -> str:
    """Canonical text form; ``parse_kb(serialize_kb(kb)) == kb``."""
    lines = []
    for rng in kb.ranges:
        lines.append(f"range {rng.name} {{ {', '.join(rng.values)} }}")
    for sym in kb.symbols:
        params = ", ".join(f"x{i + 1}" for i in range(sym.arity))
        lines.append(f"var {sym.name}({params}) : {sym.range.name}")
    for rule in kb.rules:
        body = str(rule.consequent)
        if rule.antecedents:
            body += " | " + ", ".join(str(a) for a in rule.antecedents)
        cpt = " ".join(_fmt_prob(p) for p in rule.matrix.entries)
        lines.append(f"rule {rule.id} {{ {body} : cpt [ {cpt} ] }}")
    return "".join(line + "\n" for line in lines)
