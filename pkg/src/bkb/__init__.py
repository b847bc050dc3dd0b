"""Bayesian knowledge bases: parse first-order probability rules, check
constraints C1-C4, generate query-specific Bayesian networks by backward
chaining, and compute exact posteriors."""

from bkb.core import (
    Constant,
    FunctionSymbol,
    GroundRuleInstance,
    KnowledgeBase,
    LinkMatrix,
    Rule,
    Term,
    ValueRange,
    Variable,
    match,
    matrix_lookup,
    rule_ground_instance,
    substitute,
)
from bkb.generator import GroundNetwork, backward_chain, export_dot, find_rule_for, generate_network, topological_levels
from bkb.inference import Posterior, posterior, variable_elimination
from bkb.parser import parse_bqe, parse_evidence, parse_kb, parse_query, serialize_kb
from bkb.validator import ValidationReport, Violation, validate

__all__ = [
    "Constant",
    "FunctionSymbol",
    "GroundNetwork",
    "GroundRuleInstance",
    "KnowledgeBase",
    "LinkMatrix",
    "Posterior",
    "Rule",
    "Term",
    "ValidationReport",
    "ValueRange",
    "Variable",
    "Violation",
    "backward_chain",
    "export_dot",
    "find_rule_for",
    "generate_network",
    "match",
    "matrix_lookup",
    "parse_bqe",
    "parse_evidence",
    "parse_kb",
    "parse_query",
    "posterior",
    "rule_ground_instance",
    "serialize_kb",
    "substitute",
    "topological_levels",
    "validate",
    "variable_elimination",
]
