"""A small arithmetic expression language for configuration files.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Evaluation is vectorised over numpy arrays bound to the variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "ExpressionError",
    "Num",
    "Var",
    "Unary",
    "Binary",
    "Call",
    "Expression",
    "parse",
    "eval_expression",
    "to_source",
    "VARIABLES",
    "FUNCTIONS",
]

VARIABLES = ("x", "t", "k", "pi")
FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "pow": 2}


class ExpressionError(ValueError):
    """Parse or evaluation error; ``position`` is a 0-based column in the source."""

    def __init__(self, message: str, position: int, source: str = ""):
        detail = f"{message} at position {position}"
        if source:
            detail += f" in {source!r}"
        super().__init__(detail)
        self.position = position
        self.source = source


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = 0


@dataclass(frozen=True)
class Unary:
    operand: "Node"
    pos: int = 0


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"
    pos: int = 0


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]
    pos: int = 0


Node = Union[Num, Var, Unary, Binary, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, val, pos = self.take()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ExpressionError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r}", pos, self.text)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = Binary(op, node, self.term(), pos)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = Binary(op, node, self.unary(), pos)
        return node

    def unary(self) -> Node:
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary(self.unary(), pos)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return Binary("^", base, self.unary(), pos)
        return base

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val), pos)
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {val!r}", pos, self.text)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[val]:
                    raise ExpressionError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", pos, self.text
                    )
                return Call(val, tuple(args), pos)
            if val not in VARIABLES:
                raise ExpressionError(f"unknown variable {val!r}", pos, self.text)
            return Var(val, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExpressionError(f"unexpected {found}", pos, self.text)


def parse(text: str) -> Node:
    """Parse ``text`` into an AST; raises :class:`ExpressionError` with a position."""
    if not isinstance(text, str):
        raise ExpressionError(f"expression must be a string, got {type(text).__name__}", 0)
    return _Parser(text).parse()


def _free(node: Node, out: set) -> set:
    if isinstance(node, Var) and node.name != "pi":
        out.add(node.name)
    elif isinstance(node, Unary):
        _free(node.operand, out)
    elif isinstance(node, Binary):
        _free(node.left, out)
        _free(node.right, out)
    elif isinstance(node, Call):
        for a in node.args:
            _free(a, out)
    return out


def _domain(node: Node, source: str, message: str) -> ExpressionError:
    return ExpressionError(message, node.pos, source)


def _eval(node: Node, env: Mapping[str, np.ndarray], source: str):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name == "pi":
            return np.pi
        if node.name not in env:
            raise ExpressionError(f"unbound variable {node.name!r}", node.pos, source)
        return env[node.name]
    if isinstance(node, Unary):
        return -_eval(node.operand, env, source)
    if isinstance(node, Call):
        args = [np.asarray(_eval(a, env, source), dtype=float) for a in node.args]
        if node.name == "sqrt":
            if np.any(args[0] < 0):
                raise _domain(node, source, "sqrt of a negative number")
            return np.sqrt(args[0])
        if node.name == "pow":
            return _power(node, args[0], args[1], source)
        return {"sin": np.sin, "cos": np.cos, "exp": np.exp}[node.name](args[0])
    left = np.asarray(_eval(node.left, env, source), dtype=float)
    right = np.asarray(_eval(node.right, env, source), dtype=float)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if np.any(right == 0):
            raise _domain(node, source, "division by zero")
        return left / right
    return _power(node, left, right, source)


def _power(node: Node, base: np.ndarray, exponent: np.ndarray, source: str):
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        out = np.power(base, exponent)
    bad = ~np.isfinite(out) & np.isfinite(base) & np.isfinite(exponent)
    if np.any(bad):
        raise _domain(node, source, "power outside its domain")
    return out


def to_source(node: Node) -> str:
    """Fully parenthesised source text that parses back to an equal AST (positions aside)."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    return f"({to_source(node.left)} {node.op} {to_source(node.right)})"


@dataclass(frozen=True)
class Expression:
    """Parsed expression together with its source text."""

    source: str

    def __post_init__(self):
        object.__setattr__(self, "_ast", parse(self.source))

    @property
    def ast(self) -> Node:
        return self._ast

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(_free(self._ast, set()))

    def require(self, allowed: set[str] | frozenset[str], where: str = "expression") -> "Expression":
        extra = self.variables - set(allowed)
        if extra:
            name = sorted(extra)[0]
            raise ExpressionError(
                f"{where}: variable {name!r} is not allowed here (allowed: {', '.join(sorted(allowed))})",
                _position_of(self._ast, name), self.source,
            )
        return self

    def __call__(self, **bindings) -> np.ndarray | float:
        return eval_expression(self, bindings)

    def evaluate(self, shape_like: np.ndarray | None = None, **bindings) -> np.ndarray:
        """Evaluate and broadcast to the shape of ``shape_like`` (if given)."""
        out = np.asarray(eval_expression(self, bindings), dtype=float)
        if shape_like is not None:
            out = np.broadcast_to(out, np.shape(shape_like)).copy()
        return out


def _position_of(node: Node, name: str) -> int:
    if isinstance(node, Var) and node.name == name:
        return node.pos
    children = ()
    if isinstance(node, Unary):
        children = (node.operand,)
    elif isinstance(node, Binary):
        children = (node.left, node.right)
    elif isinstance(node, Call):
        children = node.args
    for c in children:
        p = _position_of(c, name)
        if p >= 0:
            return p
    return -1


def eval_expression(e: Expression | Node | str, bindings: Mapping[str, float | np.ndarray]):
    """Evaluate with the given variable bindings (scalars or numpy arrays)."""
    if isinstance(e, str):
        e = Expression(e)
    if isinstance(e, Expression):
        node, source = e.ast, e.source
    else:
        node, source = e, ""
    env = {k: np.asarray(v, dtype=float) if not np.isscalar(v) else float(v) for k, v in bindings.items()}
    out = _eval(node, env, source)
    if np.ndim(out) == 0:
        return float(out)
    return out
