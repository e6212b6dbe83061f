"""Coefficient expressions and piecewise coefficient functions.

The expression language is deliberately tiny::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right associative
    atom   := NUMBER | "t" | "pi" | NAME "(" args ")" | "(" expr ")"

Functions: ``abs``, ``sqrt``, ``exp``, ``ln`` (one argument) and ``pow(a, b)``.

Parsed trees are immutable.  Every tree is compiled twice, once for scalar
evaluation through :mod:`math` (used inside the ODE stepper) and once for
:mod:`numpy` arrays (used by grid scans).  A non-finite result is always an
:class:`ExpressionDomainError`; NaN is never propagated.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

__all__ = [
    "ExpressionError",
    "ExpressionSyntaxError",
    "ExpressionDomainError",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Call",
    "Expression",
    "parse_expression",
    "PiecewiseFunction",
    "eval_piecewise",
]


class ExpressionError(ValueError):
    """Base class for expression failures."""


class ExpressionSyntaxError(ExpressionError):
    """Malformed source text; ``offset`` is a UTF-8 byte offset."""

    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset
        self.source = source


class ExpressionDomainError(ExpressionError, ArithmeticError):
    """Evaluation left the real domain (log of nonpositive, overflow, ...)."""


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = "t"


@dataclass(frozen=True)
class Unary:
    op: str  # neg, abs, sqrt, exp, ln
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str  # only "pow"
    args: tuple


Node = Union[Const, Var, Unary, Binary, Call]

_UNARY_FUNCS = ("abs", "sqrt", "exp", "ln")
_CONSTANTS = {"pi": math.pi}


def _to_source(node: Node) -> str:
    if isinstance(node, Const):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 else text
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{_to_source(node.arg)})"
        return f"{node.op}({_to_source(node.arg)})"
    if isinstance(node, Binary):
        return f"({_to_source(node.left)} {node.op} {_to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_to_source(a) for a in node.args)})"
    raise TypeError(node)


def _substitute(node: Node, replacement: Node) -> Node:
    if isinstance(node, Var):
        return replacement
    if isinstance(node, Const):
        return node
    if isinstance(node, Unary):
        return Unary(node.op, _substitute(node.arg, replacement))
    if isinstance(node, Binary):
        return _fold(Binary(node.op, _substitute(node.left, replacement),
                            _substitute(node.right, replacement)))
    return Call(node.name, tuple(_substitute(a, replacement) for a in node.args))


def _fold(node: Binary) -> Node:
    """Rewrite a - (b - X) and (a - X) - b so that 1 - (1 - t) stays exact near t = 0."""
    if node.op != "-":
        return node
    left, right = node.left, node.right
    if isinstance(left, Const) and isinstance(right, Binary) and right.op == "-" \
            and isinstance(right.left, Const):
        diff = left.value - right.left.value
        return right.right if diff == 0.0 else Binary("+", Const(diff), right.right)
    if isinstance(right, Const) and isinstance(left, Binary) and left.op == "-" \
            and isinstance(left.left, Const):
        diff = left.left.value - right.value
        return Unary("neg", left.right) if diff == 0.0 else Binary("-", Const(diff), left.right)
    return node


# ---------------------------------------------------------------------------
# Code generation

def _py_code(node: Node, lib: str) -> str:
    """Python source for ``node``; ``lib`` is "m" (math) or "np"."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Unary):
        a = _py_code(node.arg, lib)
        if node.op == "neg":
            return f"(-{a})"
        name = {"abs": "fabs" if lib == "m" else "abs", "ln": "log"}.get(node.op, node.op)
        return f"{lib}.{name}({a})"
    if isinstance(node, Binary):
        a, b = _py_code(node.left, lib), _py_code(node.right, lib)
        if node.op == "^":
            return f"{lib}.{'pow' if lib == 'm' else 'power'}({a}, {b})"
        return f"({a} {node.op} {b})"
    a, b = (_py_code(x, lib) for x in node.args)
    return f"{lib}.{'pow' if lib == 'm' else 'power'}({a}, {b})"


def _compile(node: Node, lib: str):
    code = f"lambda t: {_py_code(node, lib)}"
    return eval(code, {"m": math, "np": np})  # noqa: S307 - generated from a parsed tree


@dataclass(frozen=True)
class Expression:
    """A parsed expression in the single variable ``t``."""

    ast: Node
    source: str = field(default="", compare=False)
    _scalar: object = field(default=None, init=False, repr=False, compare=False)
    _vector: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_scalar", _compile(self.ast, "m"))
        object.__setattr__(self, "_vector", _compile(self.ast, "np"))

    @property
    def scalar(self):
        """The raw compiled scalar callable (no finiteness check)."""
        return self._scalar

    def __call__(self, t: float) -> float:
        try:
            value = self._scalar(float(t))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ExpressionDomainError(f"{self.to_source()} at t={t!r}: {exc}") from None
        if not math.isfinite(value):
            raise ExpressionDomainError(f"{self.to_source()} is not finite at t={t!r}")
        return value

    def evaluate_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        try:
            with np.errstate(all="raise", under="ignore"):
                value = self._vector(t)
        except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
            raise ExpressionDomainError(f"{self.to_source()}: {exc}") from None
        value = np.broadcast_to(np.asarray(value, dtype=float), t.shape).copy()
        if not np.all(np.isfinite(value)):
            bad = t[~np.isfinite(value)] if t.ndim else t
            raise ExpressionDomainError(f"{self.to_source()} not finite at t={bad}")
        return value

    def to_source(self) -> str:
        return _to_source(self.ast)

    def substitute(self, replacement: "Expression | Node") -> "Expression":
        """Replace every occurrence of ``t`` by ``replacement``."""
        node = replacement.ast if isinstance(replacement, Expression) else replacement
        return Expression(_substitute(self.ast, node))

    def mirrored(self, sign: float = 1.0) -> "Expression":
        """``sign * self(1 - t)`` as a new expression."""
        node = _substitute(self.ast, Binary("-", Const(1.0), Var()))
        if sign < 0:
            node = Unary("neg", node)
        return Expression(node)

    def __str__(self) -> str:
        return self.source or self.to_source()


# ---------------------------------------------------------------------------
# Parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            skip = len(src[pos:]) - len(src[pos:].lstrip())
            raise ExpressionSyntaxError(
                f"unexpected character {src[pos + skip]!r}",
                len(src[: pos + skip].encode()), src)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(src[:start].encode())))
        pos = m.end()
    tokens.append(("end", "", len(src.encode())))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", off, self.src)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {text!r}", off, self.src)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        if self.peek()[0] == "op" and self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, off = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text == "t":
                return Var()
            if text in _CONSTANTS:
                return Const(_CONSTANTS[text])
            if text in _UNARY_FUNCS or text == "pow":
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                want = 2 if text == "pow" else 1
                if len(args) != want:
                    raise ExpressionSyntaxError(
                        f"{text} takes {want} argument(s), got {len(args)}", off, self.src)
                return Call("pow", tuple(args)) if text == "pow" else Unary(text, args[0])
            raise ExpressionSyntaxError(f"unknown identifier {text!r}", off, self.src)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {found}", off, self.src)


def parse_expression(src: str) -> Expression:
    """Parse ``src`` into an :class:`Expression`.

    >>> parse_expression("t*(1-t)*(t-0.25)")(0.5)
    0.0625
    """
    if not isinstance(src, str) or not src.strip():
        raise ExpressionSyntaxError("empty expression", 0, src if isinstance(src, str) else "")
    return Expression(_Parser(src).parse(), source=src)


# ---------------------------------------------------------------------------
# Piecewise functions

_SIDES = ("left", "right", "point")


@dataclass(frozen=True)
class PiecewiseFunction:
    """A function on [0, 1] given by one expression per open segment.

    ``values`` maps breakpoint indices to explicit point values.  Breakpoints
    without an explicit value fall back to ``default``: ``"min"`` takes the
    smaller one-sided limit (lower semicontinuous envelope), ``"right"`` the
    right limit (left limit at t = 1).
    """

    breakpoints: tuple
    segments: tuple
    values: Mapping[int, float] = field(default_factory=dict)
    default: str = "right"

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        segs = tuple(s if isinstance(s, Expression) else parse_expression(s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "values", {int(k): float(v) for k, v in dict(self.values).items()})
        if len(bps) < 2 or bps[0] != 0.0 or bps[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(segs) != len(bps) - 1:
            raise ValueError(f"need {len(bps) - 1} segments for {len(bps)} breakpoints, got {len(segs)}")
        if self.default not in ("min", "right"):
            raise ValueError(f"unknown default rule {self.default!r}")
        for k, v in self.values.items():
            if not 0 <= k < len(bps) or not math.isfinite(v):
                raise ValueError(f"bad point value at breakpoint index {k}")

    @classmethod
    def constant(cls, value: float, **kw) -> "PiecewiseFunction":
        return cls((0.0, 1.0), (Expression(Const(float(value))),), **kw)

    @classmethod
    def single(cls, src: str, **kw) -> "PiecewiseFunction":
        return cls((0.0, 1.0), (src,), **kw)

    @property
    def interior_breakpoints(self) -> tuple:
        return self.breakpoints[1:-1]

    def breakpoint_index(self, t: float, tol: float = 0.0):
        for i, b in enumerate(self.breakpoints):
            if abs(t - b) <= tol:
                return i
        return None

    def segment_index(self, t: float) -> int:
        """Index of the segment whose closure contains ``t`` (rightmost on ties)."""
        bps = self.breakpoints
        lo, hi = 0, len(bps) - 2
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if bps[mid] <= t:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def limit(self, k: int, side: str) -> float:
        """One-sided limit at breakpoint index ``k``."""
        if side == "left":
            if k == 0:
                raise ValueError("no left limit at t=0")
            return self.segments[k - 1](self.breakpoints[k])
        if side == "right":
            if k == len(self.breakpoints) - 1:
                raise ValueError("no right limit at t=1")
            return self.segments[k](self.breakpoints[k])
        raise ValueError(side)

    def point_value(self, k: int) -> float:
        if k in self.values:
            return self.values[k]
        last = len(self.breakpoints) - 1
        if k == 0:
            return self.limit(0, "right")
        if k == last:
            return self.limit(last, "left")
        if self.default == "min":
            return min(self.limit(k, "left"), self.limit(k, "right"))
        return self.limit(k, "right")

    def __call__(self, t: float, side: str = "point") -> float:
        return eval_piecewise(self, t, side)

    def evaluate_array(self, t) -> np.ndarray:
        """Vectorized point evaluation (breakpoints get their point values)."""
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape)
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.segments) - 1)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                out[mask] = seg.evaluate_array(t[mask])
        for k, b in enumerate(self.breakpoints):
            hit = t == b
            if np.any(hit):
                out[hit] = self.point_value(k)
        return out

    def map(self, fn) -> "PiecewiseFunction":
        return PiecewiseFunction(self.breakpoints, tuple(fn(s) for s in self.segments),
                                 self.values, self.default)

    def mirrored(self, sign: float = 1.0) -> "PiecewiseFunction":
        """``sign * self(1 - t)`` with mirrored breakpoints and point values."""
        n = len(self.breakpoints) - 1
        bps = tuple(1.0 - b for b in reversed(self.breakpoints))
        bps = (0.0,) + bps[1:-1] + (1.0,)
        segs = tuple(s.mirrored(sign) for s in reversed(self.segments))
        if sign < 0 and self.default == "min":
            raise ValueError("cannot negate a lower semicontinuous function")
        vals = {n - k: sign * v for k, v in self.values.items()}
        if self.default == "right":
            # "right" is not mirror invariant; pin interior point values explicitly
            for k in range(1, n):
                vals.setdefault(n - k, sign * self.point_value(k))
        return PiecewiseFunction(bps, segs, vals, self.default)

    def check_one_sided_limits(self, deltas=(1e-4, 1e-6, 1e-8)) -> list:
        """Compare one-sided values at interior breakpoints with sampled approach.

        Returns a list of ``(breakpoint, side, value, extrapolated)`` tuples.
        The two smallest offsets are combined by linear Richardson extrapolation.
        """
        rows = []
        for k in range(1, len(self.breakpoints) - 1):
            b = self.breakpoints[k]
            for side, seg, sgn in (("left", self.segments[k - 1], -1.0), ("right", self.segments[k], 1.0)):
                samples = [seg(b + sgn * d) for d in deltas]
                d1, d2 = deltas[-2], deltas[-1]
                f1, f2 = samples[-2], samples[-1]
                extrapolated = f2 + (f2 - f1) * d2 / (d1 - d2)
                rows.append((b, side, self.limit(k, side), extrapolated))
        return rows


def eval_piecewise(pf: PiecewiseFunction, t: float, side: str = "point") -> float:
    """Evaluate ``pf`` at ``t`` as a point value or a one-sided limit."""
    if side not in _SIDES:
        raise ValueError(f"side must be one of {_SIDES}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    if side == "left" and t == 0.0:
        raise ValueError("left limit undefined at t=0")
    if side == "right" and t == 1.0:
        raise ValueError("right limit undefined at t=1")
    k = pf.breakpoint_index(t)
    if k is None:
        return pf.segments[pf.segment_index(t)](t)
    if side == "point":
        return pf.point_value(k)
    return pf.limit(k, side)
