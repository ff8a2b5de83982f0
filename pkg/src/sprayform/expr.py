"""Expression DSL for spray coefficients, Finsler candidates and projective factors.

Grammar (LL(1) recursive descent, ``^`` binds tightest, then unary minus,
then ``* /``, then ``+ -``, all binary operators left-associative)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' number)?
    atom   := number | ident | func '(' expr ')' | '(' expr ')'
    ident  := ('x'|'y') digits        # 1-based, validated against n
    func   := 'sqrt'|'sin'|'cos'|'exp'|'log'

Exponents must be numeric literals so the jet composition rules stay
closed-form.  abs/min/max are deliberately absent: every construction here
assumes smoothness away from the zero section.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet3, apply_unary

FUNCTIONS = ("sqrt", "sin", "cos", "exp", "log")


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalDomainError(ArithmeticError):
    """Evaluation left the domain (division by zero, sqrt/log of <= 0)."""

    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in subexpression '{subexpr}'")
        self.subexpr = subexpr


# -- AST ----------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # 'x' or 'y'
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: float


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Num | Var | Neg | BinOp | Pow | Call


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z]+\d*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos)
        if m.lastgroup is None:  # trailing whitespace
            break
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val or 'end of input'!r}", pos)

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                e = BinOp(val, e, self.term())
            else:
                return e

    def term(self):
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                e = BinOp(val, e, self.factor())
            else:
                return e

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num":
                raise ParseError("exponent must be a numeric literal", pos)
            return Pow(base, float(val))
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == "name":
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            m = re.fullmatch(r"([xy])([0-9]+)", val)
            if m is None:
                raise ParseError(f"unknown identifier {val!r}", pos)
            idx = int(m.group(2))
            if not 1 <= idx <= self.n:
                raise ParseError(
                    f"variable {val!r} out of range for dimension n={self.n}", pos)
            return Var(m.group(1), idx)
        raise ParseError(f"unexpected token {val or 'end of input'!r}", pos)


def parse(text: str, n: int) -> Expr:
    """Parse an expression in dimension n (variables x1..xn, y1..yn)."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    return _Parser(text, n).parse()


# -- printing -----------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    if isinstance(e, Pow):
        return _PREC["^"]
    if isinstance(e, Num) and e.value < 0:
        return _PREC["neg"]
    return _PREC["atom"]


def _fmt_num(v: float) -> str:
    return format(v, ".17g")


def pretty(e: Expr) -> str:
    """Deterministic rendering; pretty(parse(pretty(e))) == pretty(e)."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return f"{e.kind}{e.index}"
    if isinstance(e, Neg):
        inner = pretty(e.arg)
        if _prec(e.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = pretty(e.base)
        if _prec(e.base) < _PREC["atom"]:
            base = f"({base})"
        return f"{base}^{_fmt_num(e.exponent)}"
    if isinstance(e, Call):
        return f"{e.fn}({pretty(e.arg)})"
    if isinstance(e, BinOp):
        lp, rp = _prec(e.left), _prec(e.right)
        mine = _PREC[e.op]
        left = pretty(e.left)
        right = pretty(e.right)
        if lp < mine:
            left = f"({left})"
        # left-associative: right operand needs parens at equal precedence
        if rp < mine or (rp == mine and e.op in "-/*+"):
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")


# -- evaluation ---------------------------------------------------------


def _int_exponent(r: float):
    i = int(r)
    return i if i == r and abs(i) <= 16 else None


def eval_plain(e: Expr, x, y) -> float:
    """Recursive point evaluation; the jet-free reference path."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(x[e.index - 1] if e.kind == "x" else y[e.index - 1])
    if isinstance(e, Neg):
        return -eval_plain(e.arg, x, y)
    if isinstance(e, BinOp):
        a = eval_plain(e.left, x, y)
        b = eval_plain(e.right, x, y)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise EvalDomainError("division by zero", pretty(e))
        return a / b
    if isinstance(e, Pow):
        base = eval_plain(e.base, x, y)
        k = _int_exponent(e.exponent)
        if k is None and base <= 0.0:
            raise EvalDomainError("fractional power of non-positive value", pretty(e))
        return base ** e.exponent
    if isinstance(e, Call):
        v = eval_plain(e.arg, x, y)
        if e.fn in ("sqrt", "log") and v <= 0.0:
            raise EvalDomainError(f"{e.fn} of non-positive value", pretty(e))
        return getattr(math, e.fn)(v)
    raise TypeError(f"not an expression node: {e!r}")


def eval_jet(e: Expr, point) -> Jet3:
    """Jet of the expression at (x, y), in the 2n variables (x1..xn, y1..yn)."""
    x, y = point.x, point.y
    n = len(x)
    nv = 2 * n

    def rec(node) -> Jet3:
        if isinstance(node, Num):
            return Jet3.constant(node.value, nv)
        if isinstance(node, Var):
            if node.kind == "x":
                return Jet3.variable(node.index - 1, float(x[node.index - 1]), nv)
            return Jet3.variable(n + node.index - 1, float(y[node.index - 1]), nv)
        if isinstance(node, Neg):
            return -rec(node.arg)
        if isinstance(node, BinOp):
            a = rec(node.left)
            b = rec(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if b.value == 0.0:
                raise EvalDomainError("division by zero", pretty(node))
            return a / b
        if isinstance(node, Pow):
            base = rec(node.base)
            k = _int_exponent(node.exponent)
            if k is not None:
                if k >= 0:
                    out = Jet3.constant(1.0, nv)
                    for _ in range(k):
                        out = out * base
                    return out
                if base.value == 0.0:
                    raise EvalDomainError("negative power of zero", pretty(node))
                out = Jet3.constant(1.0, nv)
                for _ in range(-k):
                    out = out / base
                return out
            try:
                return apply_unary("pow", base, node.exponent)
            except ValueError as exc:
                raise EvalDomainError(str(exc), pretty(node)) from None
        if isinstance(node, Call):
            arg = rec(node.arg)
            try:
                return apply_unary(node.fn, arg)
            except ValueError as exc:
                raise EvalDomainError(str(exc), pretty(node)) from None
        raise TypeError(f"not an expression node: {node!r}")

    return rec(e)


def _guarded_pow(base: float, r: float) -> float:
    # bare ** would return a complex for negative base and fractional exponent
    if base <= 0.0 and r != int(r):
        raise ValueError("fractional power of non-positive value")
    return base ** r


_COMPILE_ENV = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos,
                "exp": math.exp, "log": math.log, "_pow": _guarded_pow}


def _pycode(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"{e.kind}[{e.index - 1}]"
    if isinstance(e, Neg):
        return f"(-{_pycode(e.arg)})"
    if isinstance(e, BinOp):
        return f"({_pycode(e.left)} {e.op} {_pycode(e.right)})"
    if isinstance(e, Pow):
        if e.exponent == int(e.exponent):
            return f"({_pycode(e.base)} ** {e.exponent!r})"
        return f"_pow({_pycode(e.base)}, {e.exponent!r})"
    if isinstance(e, Call):
        return f"{e.fn}({_pycode(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def compile_fn(e: Expr):
    """Fast (x, y) -> float closure for inner loops (geodesic integration)."""
    return eval(f"lambda x, y: {_pycode(e)}", dict(_COMPILE_ENV))  # noqa: S307


# -- models -------------------------------------------------------------


@dataclass(frozen=True)
class SprayModel:
    """Dimension n plus the n coefficient expressions f^i(x, y), 2-homogeneous in y."""

    n: int
    f: tuple

    @staticmethod
    def from_strings(n: int, sources) -> "SprayModel":
        sources = list(sources)
        if len(sources) != n:
            raise ValueError(f"expected {n} coefficient expressions, got {len(sources)}")
        return SprayModel(n, tuple(parse(s, n) for s in sources))


@dataclass(frozen=True)
class ScalarModel:
    """A scalar function of (x, y) with a declared homogeneity degree in y."""

    n: int
    expr: Expr
    degree: float = 1.0

    @staticmethod
    def from_string(n: int, source: str, degree: float = 1.0) -> "ScalarModel":
        return ScalarModel(n, parse(source, n), degree)


@dataclass
class HomogeneityReport:
    max_residual: float
    passed: bool
    tol_scale: float
    failures: list = field(default_factory=list)


def sample_points(n: int, count: int, seed: int, x_box=(-1.0, 1.0),
                  y_annulus=(0.5, 2.0)):
    """Draw (x, y) samples: x uniform in a box, |y| uniform on an annulus.

    ``x_box`` is either a single (lo, hi) pair applied to every axis or a
    sequence of per-axis pairs.  y avoids the zero section by construction.
    """
    from .geometry import TangentPoint

    rng = np.random.default_rng(seed)
    box = np.asarray(x_box, dtype=float)
    if box.ndim == 1:
        box = np.tile(box, (n, 1))
    pts = []
    for _ in range(count):
        x = rng.uniform(box[:, 0], box[:, 1])
        direction = rng.normal(size=n)
        norm = np.linalg.norm(direction)
        while norm < 1e-12:
            direction = rng.normal(size=n)
            norm = np.linalg.norm(direction)
        radius = rng.uniform(*y_annulus)
        pts.append(TangentPoint(x, radius * direction / norm))
    return pts


def _euler_residual(e: Expr, degree: float, point) -> tuple[float, float]:
    jet = eval_jet(e, point)
    n = len(point.x)
    val = jet.value
    radial = 0.0
    for i in range(n):
        alpha = [0] * (2 * n)
        alpha[n + i] = 1
        radial += point.y[i] * jet.partial(alpha)
    return abs(radial - degree * val), abs(val)


def homogeneity_check(model, samples, tol_scale: float = 1e-9) -> HomogeneityReport:
    """Euler-identity test of the declared y-homogeneity on a sample set.

    For degree k the residual is |sum_i y^i dg/dy^i - k g| per sample, passed
    against tol_scale * (1 + |g|); a SprayModel checks every f^i at k = 2.
    """
    if not samples:
        raise ValueError("homogeneity_check needs at least one sample")
    if isinstance(model, SprayModel):
        targets = [(e, 2.0) for e in model.f]
    else:
        targets = [(model.expr, float(model.degree))]
    worst = 0.0
    ok = True
    failures = []
    for e, degree in targets:
        for j, p in enumerate(samples):
            try:
                res, mag = _euler_residual(e, degree, p)
            except (EvalDomainError, ZeroDivisionError) as exc:
                failures.append((j, str(exc)))
                ok = False
                continue
            worst = max(worst, res)
            if res > tol_scale * (1.0 + mag):
                ok = False
    return HomogeneityReport(worst, ok, tol_scale, failures)
