"""A small expression language for scalar fields over (x, y, z, xi).

Grammar::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := unary ('^' factor)?
    unary   := '-'? primary
    primary := number | ident | ident '(' args ')' | '(' expr ')'
    args    := expr (',' expr)*

``^`` is right-associative and binds tighter than unary minus, so ``-x^2``
is ``-(x^2)``.  Numbers are decimal with an optional exponent.  Exponents of
``^`` must not depend on the coordinates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import dual
from .calculus import ScalarField

VARIABLES = {"x": 0, "y": 1, "z": 2, "xi": 3}
CONSTANTS = ("pi", "eps", "kappa", "l0", "lambda")
FUNCTIONS = {
    "sin": (1, dual.sin),
    "cos": (1, dual.cos),
    "exp": (1, dual.exp),
    "sqrt": (1, dual.sqrt),
    "atan2": (2, dual.atan2),
    "bump": (1, dual.bump),
}


class ParseError(ValueError):
    def __init__(self, offset: int, expected: str, found: str):
        self.offset = offset
        self.expected = expected
        self.found = found
        super().__init__(f"at offset {offset}: expected {expected}, found {found}")


class EvaluationError(ValueError):
    pass


# ------------------------------------------------------------------ AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


# ------------------------------------------------------------------ lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number, ident, op, end
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    data = text.encode("utf-8")
    # offsets are byte offsets; track them alongside character positions
    byte_pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(byte_pos, "a token", repr(text[pos]))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), byte_pos))
        byte_pos += len(m.group().encode("utf-8"))
        pos = m.end()
    tokens.append(Token("end", "", len(data)))
    return tokens


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "end" else repr(tok.text)


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str, what: str):
        if not self.accept(text):
            raise ParseError(self.tok.offset, what, _describe(self.tok))

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            expected = "operator or end of input"
            if self.tok.text == ")":
                expected = "end of input (unbalanced ')')"
            raise ParseError(self.tok.offset, expected, _describe(self.tok))
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        base = self.unary()
        if self.accept("^"):
            start = self.tok.offset
            exponent = self.factor()
            if _mentions_variable(exponent):
                raise ParseError(start, "exponent free of x, y, z, xi", "coordinate-dependent exponent")
            return BinOp("^", base, exponent)
        return base

    def unary(self):
        if self.accept("-"):
            return Neg(self.power_operand())
        return self.primary()

    def power_operand(self):
        # '^' binds tighter than unary minus: -a^b == -(a^b)
        base = self.primary()
        if self.accept("^"):
            start = self.tok.offset
            exponent = self.factor()
            if _mentions_variable(exponent):
                raise ParseError(start, "exponent free of x, y, z, xi", "coordinate-dependent exponent")
            return BinOp("^", base, exponent)
        return base

    def primary(self):
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if self.tok.kind == "op" and self.tok.text == "(":
                if name not in FUNCTIONS:
                    raise ParseError(tok.offset, "known function", repr(name))
                open_tok = self.advance()
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                if not self.accept(")"):
                    if self.tok.kind == "end":
                        raise ParseError(self.tok.offset, f"')' closing '(' at offset {open_tok.offset}", "end of input")
                    raise ParseError(self.tok.offset, "',' or ')'", _describe(self.tok))
                arity = FUNCTIONS[name][0]
                if len(args) != arity:
                    raise ParseError(tok.offset, f"{arity} argument(s) to {name}", f"{len(args)}")
                return Call(name, tuple(args))
            if name in VARIABLES:
                return Var(name)
            if name in CONSTANTS:
                return Const(name)
            if name in FUNCTIONS:
                raise ParseError(self.tok.offset, f"'(' after {name}", _describe(self.tok))
            raise ParseError(tok.offset, "known identifier", repr(name))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            if not self.accept(")"):
                raise ParseError(self.tok.offset, f"')' closing '(' at offset {tok.offset}", _describe(self.tok))
            return node
        raise ParseError(tok.offset, "primary", _describe(tok))


def _mentions_variable(node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Neg):
        return _mentions_variable(node.operand)
    if isinstance(node, BinOp):
        return _mentions_variable(node.left) or _mentions_variable(node.right)
    if isinstance(node, Call):
        return any(_mentions_variable(a) for a in node.args)
    return False


def parse(text: str):
    return _Parser(text).parse()


# ------------------------------------------------------------------ printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def to_string(node) -> str:
    """Fully parenthesised source that reparses to an equivalent tree."""
    if isinstance(node, Num):
        return repr(node.value) if node.value >= 0 else f"({node.value!r})"
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_string(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_string(node.left)} {node.op} {to_string(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_string(a) for a in node.args)})"
    raise TypeError(node)


# ------------------------------------------------------------------ evaluation


def _check(cond, msg):
    if np.any(cond):
        raise EvaluationError(msg)


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Const):
        if node.name == "pi":
            return math.pi
        try:
            return env[node.name]
        except KeyError:
            raise EvaluationError(f"unbound constant {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            _check(dual.primal(b) == 0, "division by zero")
            return a / b
        return _power(a, b)
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        if node.name == "sqrt":
            _check(dual.primal(args[0]) < 0, "sqrt of a negative number")
        return FUNCTIONS[node.name][1](*args)
    raise TypeError(node)


def _power(base, exponent):
    e = dual.primal(exponent)
    if isinstance(exponent, dual.Dual) or np.ndim(e) != 0:
        raise EvaluationError("exponent must be a constant")
    e = float(e)
    if e.is_integer():
        n = int(e)
        if n >= 0:
            return base**n
        _check(dual.primal(base) == 0, "division by zero")
        return 1.0 / base ** (-n)
    _check(dual.primal(base) <= 0, "non-integer power of a non-positive base")
    return dual.exp(e * dual.log(base))


def _env(point, params):
    x, y, z, xi = point
    env = {"x": x, "y": y, "z": z, "xi": xi}
    for k, v in (params or {}).items():
        if k not in CONSTANTS or k == "pi":
            raise EvaluationError(f"cannot bind {k!r}")
        env[k] = v
    return env


def evaluate(expr, point, params=None):
    """Value of ``expr`` at ``point`` = (x, y, z, xi); point entries may be arrays."""
    if isinstance(expr, str):
        expr = parse(expr)
    v = _eval(expr, _env(point, params))
    if isinstance(v, dual.Dual):
        return v
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def differentiate(expr, var: str, point, params=None):
    """Exact forward-mode derivative of ``expr`` with respect to ``var``."""
    if isinstance(expr, str):
        expr = parse(expr)
    if var not in VARIABLES:
        raise EvaluationError(f"unknown variable {var!r}")
    tag = dual.new_tag()
    pt = list(point)
    i = VARIABLES[var]
    pt[i] = dual.Dual(tag, pt[i], 1.0)
    d = dual.tangent(_eval(expr, _env(pt, params)), tag)
    d = np.asarray(d, dtype=float)
    return float(d) if d.ndim == 0 else d


class ExprField(ScalarField):
    """A scalar field defined by a DSL expression with bound constants."""

    def __init__(self, expr, params=None, source=None):
        super().__init__()
        if isinstance(expr, str):
            source = expr
            expr = parse(expr)
        self.expr = expr
        self.source = source if source is not None else to_string(expr)
        self.params = dict(params or {})
        _env((0, 0, 0, 0), self.params)

    def _compute(self, c, cache):
        return _eval(self.expr, _env(c, self.params))

    def __repr__(self) -> str:
        return f"ExprField({self.source!r})"


def field(text: str, **params) -> ExprField:
    return ExprField(text, params)
