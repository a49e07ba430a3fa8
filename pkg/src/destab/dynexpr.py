"""A small expression language for vector fields ``f(x, w)`` and output maps ``g(x, w)``.

Grammar (``^`` is right associative and binds tighter than unary minus,
so ``-2^2 == -4`` and ``2^3^2 == 512``)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := number | ident | ident "(" expr ")" | "(" expr ")"

Identifiers are ``x1..xn`` (state), ``w1..wm`` (input) and the functions
sin, cos, tan, exp, log, sqrt, abs, tanh. Evaluation is IEEE double:
division by zero or the log of a negative number yields inf/nan instead of
raising.
"""

import re
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParseError

MAX_DEPTH = 64
EQUILIBRIUM_TOL = 1e-12

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)
_VAR = re.compile(r"([xw])(\d+)$")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "w"
    index: int  # 1-based


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
    func: str
    arg: object


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    column: int


def tokenize(src, line=1):
    tokens = []
    pos = 0
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            col = pos + 1 + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ParseError(f"unexpected character {src[col - 1]!r}", line, col)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(Token("eof", "", len(src) + 1))
    return tokens


class _Parser:
    def __init__(self, src, line, state_dim, input_dim):
        self.tokens = tokenize(src, line)
        self.i = 0
        self.line = line
        self.state_dim = state_dim
        self.input_dim = input_dim
        self.depth = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, self.line, tok.column)

    def advance(self):
        t = self.tok
        self.i += 1
        return t

    def accept(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            return self.advance()
        return None

    def expect(self, text):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise self.error(f"expression nested deeper than {MAX_DEPTH}")

    def parse(self):
        node = self.expr()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        if tree_depth(node) > MAX_DEPTH:
            raise ParseError(f"expression tree deeper than {MAX_DEPTH}", self.line, 1)
        return node

    def expr(self):
        self.enter()
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        self.depth -= 1
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            self.enter()
            node = Neg(self.unary())
            self.depth -= 1
            return node
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            self.enter()
            node = BinOp("^", base, self.unary())
            self.depth -= 1
            return node
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            return self.identifier(tok)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "eof":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected {tok.text!r}")

    def identifier(self, tok):
        name = tok.text
        if name in FUNCTIONS:
            if not self.accept("("):
                raise self.error(f"function {name!r} takes exactly 1 argument", tok)
            args = [self.expr()]
            while self.accept(","):
                args.append(self.expr())
            self.expect(")")
            if len(args) != 1:
                raise self.error(f"function {name!r} takes exactly 1 argument, got {len(args)}", tok)
            return Call(name, args[0])
        m = _VAR.match(name)
        if m is None:
            raise self.error(f"unknown identifier {name!r}", tok)
        kind, index = m.group(1), int(m.group(2))
        limit = self.state_dim if kind == "x" else self.input_dim
        if index < 1 or (limit is not None and index > limit):
            raise self.error(f"variable {name!r} out of range (1..{limit})", tok)
        if self.tok.kind == "op" and self.tok.text == "(":
            raise self.error(f"{name!r} is a variable, not a function")
        return Var(kind, index)


def parse_expr(src, state_dim=None, input_dim=None, line=1):
    """Parse one expression. ``None`` dims skip the range check."""
    return _Parser(src, line, state_dim, input_dim).parse()


def to_source(node):
    """Fully parenthesised source text that parses back to ``node``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    return f"({to_source(node.left)} {node.op} {to_source(node.right)})"


def _children(node):
    if isinstance(node, Neg):
        return (node.operand,)
    if isinstance(node, Call):
        return (node.arg,)
    if isinstance(node, BinOp):
        return (node.left, node.right)
    return ()


def tree_depth(node):
    """Number of nodes on the longest root-to-leaf path (iterative, so chains of any length are safe)."""
    best = 0
    stack = [(node, 1)]
    while stack:
        n, d = stack.pop()
        best = max(best, d)
        stack.extend((c, d + 1) for c in _children(n))
    return best


def variables(node):
    found = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            found.add((n.kind, n.index))
        stack.extend(_children(n))
    return found


def _compile(node):
    """Turn an AST into a closure ``(x, w) -> float64``."""
    if isinstance(node, Num):
        v = np.float64(node.value)
        return lambda x, w: v
    if isinstance(node, Var):
        i = node.index - 1
        if node.kind == "x":
            return lambda x, w: x[i]
        return lambda x, w: w[i]
    if isinstance(node, Neg):
        f = _compile(node.operand)
        return lambda x, w: -f(x, w)
    if isinstance(node, Call):
        fn = FUNCTIONS[node.func]
        f = _compile(node.arg)
        return lambda x, w: fn(f(x, w))
    lhs, rhs = _compile(node.left), _compile(node.right)
    if node.op == "+":
        return lambda x, w: lhs(x, w) + rhs(x, w)
    if node.op == "-":
        return lambda x, w: lhs(x, w) - rhs(x, w)
    if node.op == "*":
        return lambda x, w: lhs(x, w) * rhs(x, w)
    if node.op == "/":
        return lambda x, w: np.divide(lhs(x, w), rhs(x, w))
    return lambda x, w: np.power(lhs(x, w), rhs(x, w))


def evaluate_expr(node, x, w=()):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    with np.errstate(all="ignore"):
        return np.float64(_compile(node)(x, w))


class FieldSpec:
    """Parsed ``x' = f(x, w)``, ``r = g(x, w)``; immutable once built."""

    def __init__(self, state_dim, input_dim, equations, outputs, check_equilibrium=True):
        if len(equations) != state_dim:
            raise DimensionError(f"{len(equations)} equations for state dimension {state_dim}")
        self.state_dim = int(state_dim)
        self.input_dim = int(input_dim)
        self.equations = tuple(equations)
        self.outputs = tuple(outputs)
        self._f = [_compile(e) for e in self.equations]
        self._g = [_compile(e) for e in self.outputs]
        if check_equilibrium:
            dx, r = self.evaluate(np.zeros(self.state_dim), np.zeros(self.input_dim))
            bad = np.flatnonzero(~(np.abs(dx) <= EQUILIBRIUM_TOL))
            if bad.size:
                raise ParseError(
                    f"origin is not an equilibrium: dx{bad[0] + 1}(0, 0) = {dx[bad[0]]:.3g}",
                    int(bad[0]) + 1,
                    1,
                )
            bad = np.flatnonzero(~(np.abs(r) <= EQUILIBRIUM_TOL))
            if bad.size:
                raise ParseError(
                    f"output r{bad[0] + 1}(0, 0) = {r[bad[0]]:.3g}; outputs must vanish at the origin",
                    self.state_dim + int(bad[0]) + 1,
                    1,
                )

    @property
    def output_dim(self):
        return len(self.outputs)

    def evaluate(self, x, w=None):
        x = np.asarray(x, dtype=np.float64)
        w = np.zeros(self.input_dim) if w is None else np.asarray(w, dtype=np.float64).reshape(-1)
        if x.shape != (self.state_dim,) or w.shape != (self.input_dim,):
            raise DimensionError(
                f"expected x of length {self.state_dim} and w of length {self.input_dim}, "
                f"got {x.shape} and {w.shape}"
            )
        with np.errstate(all="ignore"):
            dx = np.array([f(x, w) for f in self._f], dtype=np.float64)
            r = np.array([g(x, w) for g in self._g], dtype=np.float64)
        return dx, r

    def vector_field(self, x, w):
        with np.errstate(all="ignore"):
            return np.array([f(x, w) for f in self._f], dtype=np.float64)

    def output_map(self, x, w):
        with np.errstate(all="ignore"):
            return np.array([g(x, w) for g in self._g], dtype=np.float64)

    def to_source(self):
        eqs = [f"dx{i + 1} = {to_source(e)}" for i, e in enumerate(self.equations)]
        outs = [f"r{i + 1} = {to_source(e)}" for i, e in enumerate(self.outputs)]
        return "\n".join(eqs + outs)


def parse_field(equations, outputs, state_dim=None, input_dim=None, first_line=1):
    """Build a :class:`FieldSpec` from lists of expression strings.

    Line numbers in errors count equations first, then outputs, starting
    at ``first_line``.
    """
    if state_dim is None:
        state_dim = len(equations)
    trees = []
    for k, src in enumerate(list(equations) + list(outputs)):
        trees.append(parse_expr(src, state_dim, input_dim, line=first_line + k))
    if input_dim is None:
        used = [i for t in trees for kind, i in variables(t) if kind == "w"]
        input_dim = max(used, default=0)
    eqs, outs = trees[: len(equations)], trees[len(equations):]
    return FieldSpec(state_dim, input_dim, eqs, outs)


_LINE = re.compile(r"\s*(dx|r)(\d+)\s*=(.*)$")


def parse(src, state_dim=None, input_dim=None):
    """Parse a block of ``dxK = ...`` / ``rK = ...`` lines.

    Blank lines and ``#`` comments are ignored. Equations must be numbered
    1..n without gaps, as must outputs.
    """
    eqs, outs = {}, {}
    for lineno, raw in enumerate(src.splitlines(), start=1):
        text = raw.split("#", 1)[0]
        if not text.strip():
            continue
        m = _LINE.match(text)
        if m is None:
            raise ParseError("expected 'dxK = <expr>' or 'rK = <expr>'", lineno, 1)
        target = eqs if m.group(1) == "dx" else outs
        k = int(m.group(2))
        if k in target:
            raise ParseError(f"duplicate definition of {m.group(1)}{k}", lineno, 1)
        offset = m.start(3)
        target[k] = (lineno, offset, m.group(3))
    for name, table in (("dx", eqs), ("r", outs)):
        if sorted(table) != list(range(1, len(table) + 1)):
            raise ParseError(f"{name} equations must be numbered 1..{len(table)}", 1, 1)
    n = state_dim if state_dim is not None else len(eqs)

    def build(entry):
        lineno, offset, text = entry
        try:
            return parse_expr(text, n, input_dim, line=lineno)
        except ParseError as exc:
            raise ParseError(exc.message, lineno, exc.column + offset) from None

    eq_trees = [build(eqs[k]) for k in sorted(eqs)]
    out_trees = [build(outs[k]) for k in sorted(outs)]
    m_dim = input_dim
    if m_dim is None:
        used = [i for t in eq_trees + out_trees for kind, i in variables(t) if kind == "w"]
        m_dim = max(used, default=0)
    return FieldSpec(n, m_dim, eq_trees, out_trees)
