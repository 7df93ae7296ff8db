"""
Behavioral Expressions

Arithmetic expression trees over node voltages, their text form, a
pyparsing grammar for reading them back, and sympy-compiled value and
gradient functions for the circuit solver.

Grammar:
    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := number | 'V' '(' node [',' node] ')' | '(' expr ')' | '-' factor
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import sympy
from pyparsing import (
    CaselessLiteral,
    Forward,
    Literal,
    Optional as Opt,
    ParseBaseException,
    Regex,
    Suppress,
    Word,
    ZeroOrMore,
    alphanums,
    one_of,
)

from ..config import NetlistConfig
from ..waveforms import format_number

# Binding strength used by the emitter
_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PRECEDENCE = 3
_ATOM_PRECEDENCE = 4


class Expr:
    """Base of the expression tree; supports +, -, *, / and unary -."""

    def __add__(self, other):
        return BinOp("+", self, _wrap(other))

    def __radd__(self, other):
        return BinOp("+", _wrap(other), self)

    def __sub__(self, other):
        return BinOp("-", self, _wrap(other))

    def __rsub__(self, other):
        return BinOp("-", _wrap(other), self)

    def __mul__(self, other):
        return BinOp("*", self, _wrap(other))

    def __rmul__(self, other):
        return BinOp("*", _wrap(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, _wrap(other))

    def __rtruediv__(self, other):
        return BinOp("/", _wrap(other), self)

    def __neg__(self):
        return Neg(self)

    def nodes(self) -> List[str]:
        """Referenced node names in first-appearance order."""
        seen: Dict[str, None] = {}
        _collect_nodes(self, seen)
        return list(seen)

    def __str__(self) -> str:
        return emit_expression(self)


@dataclass(frozen=True, eq=True)
class Number(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class NodeVoltage(Expr):
    """V(node) or, with ref, V(node, ref) = V(node) - V(ref)."""
    node: str
    ref: Optional[str] = None


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


def _wrap(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Number(float(value))


def _collect_nodes(expr: Expr, seen: Dict[str, None]):
    if isinstance(expr, NodeVoltage):
        seen.setdefault(expr.node)
        if expr.ref is not None:
            seen.setdefault(expr.ref)
    elif isinstance(expr, Neg):
        _collect_nodes(expr.operand, seen)
    elif isinstance(expr, BinOp):
        _collect_nodes(expr.left, seen)
        _collect_nodes(expr.right, seen)


def _precedence(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return _PRECEDENCE[expr.op]
    if isinstance(expr, Neg):
        return _NEG_PRECEDENCE
    return _ATOM_PRECEDENCE


def emit_expression(expr: Expr) -> str:
    """
    Text form with the fewest parentheses that parse back to the same tree.

    Operators are left-associative, so a right operand of equal precedence
    is parenthesized.
    """
    if isinstance(expr, Number):
        return format_number(expr.value)
    if isinstance(expr, NodeVoltage):
        if expr.ref is None:
            return f"V({expr.node})"
        return f"V({expr.node},{expr.ref})"
    if isinstance(expr, Neg):
        inner = emit_expression(expr.operand)
        if _precedence(expr.operand) < _NEG_PRECEDENCE:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(expr, BinOp):
        prec = _PRECEDENCE[expr.op]
        left = emit_expression(expr.left)
        right = emit_expression(expr.right)
        if _precedence(expr.left) < prec:
            left = f"({left})"
        if _precedence(expr.right) <= prec:
            right = f"({right})"
        return f"{left}{expr.op}{right}"
    raise TypeError(f"not an expression node: {expr!r}")


def evaluate(expr: Expr, voltages: Union[Mapping[str, float], Callable[[str], float]]) -> float:
    """Evaluate with node voltages from a mapping or callable; ground reads 0."""
    lookup = voltages if callable(voltages) else voltages.__getitem__

    def v(name: str) -> float:
        return 0.0 if name == NetlistConfig.GROUND else float(lookup(name))

    def walk(node: Expr) -> float:
        if isinstance(node, Number):
            return node.value
        if isinstance(node, NodeVoltage):
            return v(node.node) - (v(node.ref) if node.ref is not None else 0.0)
        if isinstance(node, Neg):
            return -walk(node.operand)
        a, b = walk(node.left), walk(node.right)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b

    return walk(expr)


# -- grammar ---------------------------------------------------------------

def _fold(tokens):
    result = tokens[0]
    for i in range(1, len(tokens), 2):
        result = BinOp(tokens[i], result, tokens[i + 1])
    return result


def _build_grammar():
    number = Regex(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?").set_parse_action(lambda t: Number(float(t[0])))
    node = Word(alphanums + "_")
    voltage = (
        Suppress(CaselessLiteral("V")) + Suppress("(") + node + Opt(Suppress(",") + node) + Suppress(")")
    ).set_parse_action(lambda t: NodeVoltage(t[0], t[1] if len(t) > 1 else None))

    expr = Forward()
    factor = Forward()
    negation = (Suppress(Literal("-")) + factor).set_parse_action(lambda t: Neg(t[0]))
    factor <<= number | voltage | (Suppress("(") + expr + Suppress(")")) | negation
    term = (factor + ZeroOrMore(one_of("* /") + factor)).set_parse_action(_fold)
    expr <<= (term + ZeroOrMore(one_of("+ -") + term)).set_parse_action(_fold)
    return expr


_GRAMMAR = _build_grammar()


def parse_expression(text: str) -> Expr:
    """
    Parse an expression string.

    Raises:
        ValueError: text does not follow the grammar
    """
    try:
        return _GRAMMAR.parse_string(text, parse_all=True)[0]
    except ParseBaseException as e:
        raise ValueError(f"malformed expression {text!r}: {e}") from e


# -- compilation -----------------------------------------------------------

def to_sympy(expr: Expr, symbols: Mapping[str, sympy.Symbol]) -> sympy.Expr:
    """Convert to a sympy expression; ground voltage becomes 0."""
    def v(name: str):
        return sympy.Integer(0) if name == NetlistConfig.GROUND else symbols[name]

    if isinstance(expr, Number):
        return sympy.Float(expr.value)
    if isinstance(expr, NodeVoltage):
        return v(expr.node) - (v(expr.ref) if expr.ref is not None else 0)
    if isinstance(expr, Neg):
        return -to_sympy(expr.operand, symbols)
    a, b = to_sympy(expr.left, symbols), to_sympy(expr.right, symbols)
    if expr.op == "+":
        return a + b
    if expr.op == "-":
        return a - b
    if expr.op == "*":
        return a * b
    return a / b


class CompiledExpression:
    """
    Value and gradient of an expression as plain float functions.

    Arguments are the voltages of `nodes` (ground excluded) in order.
    Compilation happens on first use.
    """

    def __init__(self, expr: Expr):
        self.expr = expr
        self.nodes: Tuple[str, ...] = tuple(n for n in expr.nodes() if n != NetlistConfig.GROUND)

    @cached_property
    def _functions(self):
        symbols = {name: sympy.Symbol(f"v{i}") for i, name in enumerate(self.nodes)}
        args = [symbols[name] for name in self.nodes]
        sym = to_sympy(self.expr, symbols)
        value = sympy.lambdify(args, sym, modules="math", cse=True)
        gradient = sympy.lambdify(args, [sympy.diff(sym, a) for a in args], modules="math", cse=True)
        return value, gradient

    def value(self, voltages: Sequence[float]) -> float:
        return float(self._functions[0](*voltages))

    def gradient(self, voltages: Sequence[float]) -> List[float]:
        if not self.nodes:
            return []
        return [float(g) for g in self._functions[1](*voltages)]
