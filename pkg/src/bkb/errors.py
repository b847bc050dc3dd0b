"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class BKBError(Exception):
    """Base class for all errors raised by this package."""


class KBError(BKBError, ValueError):
    """A programmatically built knowledge base has dangling or inconsistent references."""


class IncompleteBinding(BKBError):
    def __init__(self, rule_id: str, unbound: list[str]):
        self.rule_id = rule_id
        self.unbound = sorted(unbound)
        super().__init__(f"rule {rule_id}: variables left unbound: {', '.join(self.unbound)}")


class ValueOutOfRange(BKBError, ValueError):
    pass


class EvidenceValueOutOfRange(ValueOutOfRange):
    pass


class MissingRule(BKBError):
    def __init__(self, term):
        self.term = term
        super().__init__(f"no rule has a consequent matching {term}")


class CycleDetected(BKBError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle: " + " -> ".join(map(str, self.cycle)))


class UnknownNode(BKBError, KeyError):
    def __init__(self, term):
        self.term = term
        super().__init__(f"{term} is not a node of the network")

    def __str__(self) -> str:
        return self.args[0]


class UnknownTerm(BKBError, KeyError):
    def __init__(self, term):
        self.term = term
        super().__init__(f"{term} is not in the factor scope")

    def __str__(self) -> str:
        return self.args[0]


class OverlappingSets(BKBError, ValueError):
    pass


class IncompleteAssignment(BKBError, ValueError):
    pass


class SizeLimit(BKBError):
    pass


class ZeroEvidence(BKBError):
    """The evidence has probability zero, so the posterior is undefined."""


class ValidationFailed(BKBError):
    def __init__(self, report):
        self.report = report
        super().__init__(report.to_text())


class ParseErrorKind(enum.Enum):
    SYNTAX = "Syntax"
    UNKNOWN_SYMBOL = "UnknownSymbol"
    ARITY_MISMATCH = "ArityMismatch"
    MATRIX_SHAPE = "MatrixShape"
    MATRIX_VALUE = "MatrixValue"
    DUPLICATE_NAME = "DuplicateName"
    VALUE_OUT_OF_RANGE = "ValueOutOfRange"


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError("line and column are 1-based")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(BKBError):
    def __init__(self, kind: ParseErrorKind, message: str, span: SourceSpan):
        if not message:
            raise ValueError("ParseError needs a message")
        self.kind = kind
        self.message = message
        self.span = span
        super().__init__(f"{span}: {kind.value}: {message}")
