"""Arithmetic expressions over real chart coordinates ``x1 .. x2n``.

Pratt parser: ``^`` (right associative) binds tighter than unary minus,
which binds tighter than ``* /``, then ``+ -``. Functions: sin, cos, exp,
log, abs, sqrt (one argument) and min, max (two or more).
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import JHoloError

MAX_TEXT = 64 * 1024

FUNCTIONS = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "log": (1, None),
    "abs": (1, np.abs),
    "sqrt": (1, None),
    "min": (-2, None),
    "max": (-2, None),
}


class ExpressionError(JHoloError, ValueError):
    def __init__(self, msg, line=None, column=None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(msg + where)
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# syntax tree
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based

    @property
    def name(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


# ---------------------------------------------------------------------------
# tokens
# ---------------------------------------------------------------------------
_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))")


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list:
    if len(text.encode("utf-8")) > MAX_TEXT:
        raise ExpressionError("expression longer than 64 KiB")
    out = []
    pos = 0
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def where(i):
        ln = int(np.searchsorted(line_starts, i, side="right"))
        return ln, i - line_starts[ln - 1] + 1

    while True:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            stripped = rest.lstrip()
            if not stripped:
                ln, col = where(len(text))
                out.append(Token("end", "", ln, col))
                return out
            ln, col = where(pos + len(rest) - len(stripped))
            raise ExpressionError(f"unexpected character {stripped[0]!r}", ln, col)
        kind = m.lastgroup
        start = m.start(kind)
        ln, col = where(start)
        out.append(Token(kind, m.group(kind), ln, col))
        pos = m.end()


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------
_BINARY = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY = 30


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def fail(self, msg, t=None):
        t = t or self.tok
        raise ExpressionError(msg, t.line, t.column)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind == "end":
            self.fail(f"expected {text!r}" + (" but input ended" if self.tok.kind == "end" else ""))
        return self.advance()

    def expression(self, rbp=0):
        left = self.prefix()
        while True:
            t = self.tok
            lbp = _BINARY.get(t.text, 0) if t.kind == "op" else 0
            if lbp <= rbp:
                return left
            self.advance()
            # ^ is right associative and accepts a signed exponent
            right = self.power_rhs() if t.text == "^" else self.expression(lbp)
            left = Bin(t.text, left, right)

    def power_rhs(self):
        if self.tok.text == "-" and self.tok.kind == "op":
            self.advance()
            return Neg(self.power_rhs())
        return self.expression(_BINARY["^"] - 1)

    def prefix(self):
        t = self.advance()
        if t.kind == "num":
            v = float(t.text)
            if not np.isfinite(v):
                self.fail(f"literal {t.text} overflows", t)
            return Num(v)
        if t.kind == "name":
            if self.tok.text == "(" and self.tok.kind == "op":
                return self.call(t)
            m = re.fullmatch(r"x([1-9]\d*)", t.text)
            if m is None:
                self.fail(f"unknown identifier {t.text!r}", t)
            return Var(int(m.group(1)))
        if t.text == "-":
            return Neg(self.expression(_UNARY))
        if t.text == "+":
            return self.expression(_UNARY)
        if t.text == "(":
            e = self.expression()
            self.expect(")")
            return e
        if t.kind == "end":
            self.fail("unexpected end of input", t)
        self.fail(f"unexpected {t.text!r}", t)

    def call(self, name: Token):
        if name.text not in FUNCTIONS:
            self.fail(f"unknown function {name.text!r}", name)
        self.expect("(")
        args = [self.expression()]
        while self.tok.text == "," and self.tok.kind == "op":
            self.advance()
            args.append(self.expression())
        self.expect(")")
        arity = FUNCTIONS[name.text][0]
        if (arity > 0 and len(args) != arity) or (arity < 0 and len(args) < -arity):
            need = arity if arity > 0 else f"at least {-arity}"
            self.fail(f"{name.text} takes {need} argument(s), got {len(args)}", name)
        return Call(name.text, tuple(args))


def parse(text: str):
    p = _Parser(tokenize(text))
    tree = p.expression()
    if p.tok.kind != "end":
        p.fail(f"unexpected {p.tok.text!r}")
    return tree


# ---------------------------------------------------------------------------
# printing and evaluation
# ---------------------------------------------------------------------------
def to_text(node) -> str:
    """Fully parenthesized text; parsing it gives back the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Bin):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    return f"{node.name}(" + ", ".join(to_text(a) for a in node.args) + ")"


def variables(node) -> set:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.arg)
    if isinstance(node, Bin):
        return variables(node.left) | variables(node.right)
    out = set()
    for a in node.args:
        out |= variables(a)
    return out


def evaluate(node, x):
    """Evaluate on real coordinates ``x`` of shape ``(2n, ...)``."""
    if isinstance(node, Num):
        return np.full(np.shape(x)[1:], node.value)
    if isinstance(node, Var):
        if node.index > len(x):
            raise ExpressionError(f"{node.name} is not a coordinate (only x1..x{len(x)})")
        return np.asarray(x[node.index - 1], dtype=float)
    if isinstance(node, Neg):
        return -evaluate(node.arg, x)
    if isinstance(node, Bin):
        a = evaluate(node.left, x)
        b = evaluate(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(b == 0):
                raise ExpressionError("division by zero")
            return a / b
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.power(a, b)
        if np.any(np.isnan(out) & ~np.isnan(a) & ~np.isnan(b)):
            raise ExpressionError("power of a negative number with a non-integer exponent")
        return out
    args = [evaluate(a, x) for a in node.args]
    if node.name == "log":
        if np.any(args[0] < 0):
            raise ExpressionError("log of a negative number")
        with np.errstate(divide="ignore"):
            return np.log(args[0])
    if node.name == "sqrt":
        if np.any(args[0] < 0):
            raise ExpressionError("sqrt of a negative number")
        return np.sqrt(args[0])
    if node.name == "min":
        return np.minimum.reduce(np.broadcast_arrays(*args))
    if node.name == "max":
        return np.maximum.reduce(np.broadcast_arrays(*args))
    return FUNCTIONS[node.name][1](args[0])


@dataclass(frozen=True)
class Expression:
    tree: object
    text: str

    def __str__(self):
        return to_text(self.tree)

    @property
    def variables(self) -> set:
        return variables(self.tree)

    def __call__(self, x):
        return evaluate(self.tree, x)

    def on_complex(self, z):
        """Evaluate at complex points ``z`` of shape ``(n, ...)``."""
        z = np.asarray(z, dtype=complex)
        x = np.empty((2 * z.shape[0],) + z.shape[1:])
        x[0::2] = z.real
        x[1::2] = z.imag
        return self(x)


def parse_scalar_field(text: str) -> Expression:
    return Expression(parse(text), text)


def scalar_field_from_text(text: str, n: int = 1, name: str | None = None):
    """Wrap an expression as an envelope :class:`ScalarField` on the closed unit ball."""
    from .envelope import ScalarField, _unit_ball

    e = parse_scalar_field(text)
    if e.variables and max(e.variables) > 2 * n:
        raise ExpressionError(f"expression uses x{max(e.variables)} but n = {n}")
    return ScalarField(e.on_complex, n, _unit_ball, True, name or str(e))


def matrix_field_from_text(entries, n: int, name: str = "expression"):
    """``ComplexMatrixField`` whose ``(j, k)`` entry is ``re + i im`` of two expressions.

    ``entries[j][k]`` is either a string (real entry) or a pair ``[re, im]``.
    """
    from .structures import ComplexMatrixField

    if len(entries) != n or any(len(row) != n for row in entries):
        raise ExpressionError(f"matrix must be {n} x {n}")
    parsed = []
    for row in entries:
        prow = []
        for e in row:
            re_t, im_t = (e, "0") if isinstance(e, str) else (e[0], e[1])
            pair = (parse_scalar_field(re_t), parse_scalar_field(im_t))
            for p in pair:
                if p.variables and max(p.variables) > 2 * n:
                    raise ExpressionError(f"entry uses x{max(p.variables)} but n = {n}")
            prow.append(pair)
        parsed.append(prow)
    zero = all(not p.variables and p(np.zeros((2 * n, 1)))[0] == 0 for row in parsed for pr in row for p in pr)

    def fn(z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros((n, n) + z.shape[1:], dtype=complex)
        for j in range(n):
            for k in range(n):
                a, b = parsed[j][k]
                out[j, k] = a.on_complex(z) + 1j * b.on_complex(z)
        return out

    const = all(not p.variables for row in parsed for pr in row for p in pr)
    return ComplexMatrixField(n, fn, catalog_id=name, zero=zero, constant=const)
