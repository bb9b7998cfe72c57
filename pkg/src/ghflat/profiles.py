"""Closed-form warping profiles: parser, symbolic derivatives, piecewise blends.

A profile is a real function of the radial coordinate r.  Leaf profiles are
parsed expressions; composite profiles (sums, products, compositions,
piecewise definitions with smooth blends, mollifications) are built from
them and can evaluate derivatives up to order 3.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

TOL_C0 = 1e-8
TOL_C1 = 1e-6

FUNCTIONS = ("sin", "cos", "exp", "abs", "sqrt")


class ProfileSyntaxError(ValueError):
    """Malformed profile text; ``pos`` is the 0-based character offset."""

    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class ProfileDomainError(ValueError):
    pass


class PiecewiseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# AST


class Node:
    """Base of the expression tree.  Nodes are immutable and hashable."""

    def evaluate(self, r):
        raise NotImplementedError

    def __call__(self, r):
        with np.errstate(all="ignore"):
            return self.evaluate(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class Num(Node):
    value: float

    def evaluate(self, r):
        return np.full(np.shape(r), self.value) if np.ndim(r) else np.float64(self.value)


@dataclass(frozen=True)
class Var(Node):
    def evaluate(self, r):
        return r


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def evaluate(self, r):
        return -self.arg.evaluate(r)


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, r):
        a = self.left.evaluate(r)
        b = self.right.evaluate(r)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return np.divide(a, b)


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: float

    def evaluate(self, r):
        b = self.base.evaluate(r)
        e = self.exponent
        if float(e).is_integer():
            return np.power(b, e)
        # real power: negative base only admissible for none of our uses
        return np.where(b >= 0, np.power(np.abs(b), e), np.nan)


@dataclass(frozen=True)
class Call(Node):
    fn: str
    arg: Node

    def evaluate(self, r):
        x = self.arg.evaluate(r)
        if self.fn == "sqrt":
            return np.where(x >= 0, np.sqrt(np.abs(x)), np.nan)
        return getattr(np, self.fn)(x)


def contains_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, (Neg, Call)):
        return contains_var(node.arg)
    if isinstance(node, Pow):
        return contains_var(node.base)
    return contains_var(node.left) or contains_var(node.right)


def contains_abs(node: Node) -> bool:
    if isinstance(node, (Num, Var)):
        return False
    if isinstance(node, Call):
        return node.fn == "abs" or contains_abs(node.arg)
    if isinstance(node, Neg):
        return contains_abs(node.arg)
    if isinstance(node, Pow):
        return contains_abs(node.base)
    return contains_abs(node.left) or contains_abs(node.right)


# constant folding constructors -------------------------------------------

def _num(v: float) -> Node:
    return Num(float(v))


def neg(a: Node) -> Node:
    if isinstance(a, Num):
        return _num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value + b.value)
    if isinstance(a, Num) and a.value == 0:
        return b
    if isinstance(b, Num) and b.value == 0:
        return a
    return BinOp("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value - b.value)
    if isinstance(b, Num) and b.value == 0:
        return a
    if isinstance(a, Num) and a.value == 0:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value * b.value)
    for x, y in ((a, b), (b, a)):
        if isinstance(x, Num):
            if x.value == 0:
                return _num(0.0)
            if x.value == 1:
                return y
            if x.value == -1:
                return neg(y)
    return BinOp("*", a, b)


def div(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return _num(a.value / b.value)
    if isinstance(a, Num) and a.value == 0:
        return _num(0.0)
    if isinstance(b, Num) and b.value == 1:
        return a
    return BinOp("/", a, b)


def power(a: Node, e: float) -> Node:
    e = float(e)
    if e == 0:
        return _num(1.0)
    if e == 1:
        return a
    if isinstance(a, Num):
        v = Pow(a, e).evaluate(np.float64(a.value))
        if np.isfinite(v):
            return _num(v)
    return Pow(a, e)


def call(fn: str, a: Node) -> Node:
    if isinstance(a, Num):
        with np.errstate(all="ignore"):
            v = float(Call(fn, a).evaluate(np.float64(a.value)))
        if np.isfinite(v):
            return _num(v)
    return Call(fn, a)


# ---------------------------------------------------------------------------
# Tokenizer and recursive-descent parser

_MINUS = {"-", "−"}


def _tokenize(text: str):
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            try:
                val = float(text[i:j])
            except ValueError:
                raise ProfileSyntaxError(f"bad number {text[i:j]!r}", i, text) from None
            toks.append(("num", val, i))
            i = j
            continue
        if c == "π":
            toks.append(("id", "pi", i))
            i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("id", text[i:j], i))
            i = j
            continue
        if c in _MINUS:
            toks.append(("op", "-", i))
            i += 1
            continue
        if c in "+*/^()":
            toks.append(("op", c, i))
            i += 1
            continue
        raise ProfileSyntaxError(f"unexpected character {c!r}", i, text)
    toks.append(("end", None, n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.k = 0
        self.depth = 0

    def peek(self):
        return self.toks[self.k]

    def take(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ProfileSyntaxError(msg, tok[2], self.text)

    def expect(self, op):
        t = self.peek()
        if t[0] != "op" or t[1] != op:
            found = "end of input" if t[0] == "end" else repr(t[1])
            self.error(f"expected {op!r}, found {found}")
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        self.depth += 1
        if self.depth > 200:
            self.error("expression nested too deeply")
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        self.depth -= 1
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            tok = self.take()
            rhs = self.unary()
            if tok[1] == "*":
                node = mul(node, rhs)
            else:
                if isinstance(rhs, Num) and rhs.value == 0:
                    raise ProfileSyntaxError("division by constant zero", tok[2], self.text)
                node = div(node, rhs)
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return neg(self.power())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            tok = self.take()
            ex = self.exponent()
            if contains_var(ex) or not isinstance(ex, Num):
                raise ProfileSyntaxError("non-constant exponent", tok[2] + 1, self.text)
            return power(base, ex.value)
        return base

    def exponent(self):
        t = self.peek()
        if t[0] == "num":
            self.take()
            return Num(t[1])
        if t[0] == "op" and t[1] == "-":
            self.take()
            return neg(self.exponent())
        if t[0] == "op" and t[1] == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if t[0] == "id" and t[1] == "pi":
            self.take()
            return Num(math.pi)
        if t[0] == "id" and t[1] == "r":
            raise ProfileSyntaxError("non-constant exponent", t[2], self.text)
        self.error("expected exponent")

    def atom(self):
        t = self.peek()
        if t[0] == "num":
            self.take()
            return Num(t[1])
        if t[0] == "id":
            self.take()
            name = t[1]
            if name == "r":
                return Var()
            if name == "pi":
                return Num(math.pi)
            if name not in FUNCTIONS:
                raise ProfileSyntaxError(f"unknown function {name!r}", t[2], self.text)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return call(name, arg)
        if t[0] == "op" and t[1] == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if t[0] == "end" else repr(t[1])
        self.error(f"expected a number, 'r', a function or '(', found {found}")


# ---------------------------------------------------------------------------
# Rendering


def render(node: Node) -> str:
    """Text form that parses back to an equal tree."""
    if isinstance(node, Num):
        s = repr(float(node.value))
        if s in ("inf", "-inf", "nan"):
            raise ValueError("cannot render a non-finite constant")
        return f"({s})" if node.value < 0 or s.startswith("-") else s
    if isinstance(node, Var):
        return "r"
    if isinstance(node, Neg):
        return f"-({render(node.arg)})"
    if isinstance(node, BinOp):
        return f"({render(node.left)} {node.op} {render(node.right)})"
    if isinstance(node, Pow):
        return f"({render(node.base)})^({repr(float(node.exponent))})"
    if isinstance(node, Call):
        return f"{node.fn}({render(node.arg)})"
    raise TypeError(node)


# ---------------------------------------------------------------------------
# Symbolic derivative


def _d(node: Node) -> Node:
    if isinstance(node, Num):
        return _num(0.0)
    if isinstance(node, Var):
        return _num(1.0)
    if isinstance(node, Neg):
        return neg(_d(node.arg))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = _d(a), _d(b)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, b), mul(a, db))
        return div(sub(mul(da, b), mul(a, db)), power(b, 2.0))
    if isinstance(node, Pow):
        e = node.exponent
        return mul(mul(_num(e), power(node.base, e - 1.0)), _d(node.base))
    if isinstance(node, Call):
        u, du = node.arg, _d(node.arg)
        if node.fn == "sin":
            return mul(call("cos", u), du)
        if node.fn == "cos":
            return mul(neg(call("sin", u)), du)
        if node.fn == "exp":
            return mul(call("exp", u), du)
        if node.fn == "sqrt":
            return div(du, mul(_num(2.0), call("sqrt", u)))
        if node.fn == "abs":
            # sign(u)*u'; 0/0 at the kink, resolved one-sidedly by the caller
            return mul(div(u, call("abs", u)), du)
    raise TypeError(node)


@dataclass(frozen=True)
class ProfileExpr:
    """A parsed expression in r together with the text it came from."""

    ast: Node
    source_text: str = ""

    def __call__(self, r):
        return self.ast(r)

    def render(self) -> str:
        return render(self.ast)

    @property
    def has_abs(self) -> bool:
        return contains_abs(self.ast)


def parse_profile(text: str) -> ProfileExpr:
    """Parse ``text`` into a ProfileExpr; raises ProfileSyntaxError."""
    if not isinstance(text, str):
        raise ProfileSyntaxError("profile text must be a string", 0, "")
    try:
        return ProfileExpr(_Parser(text).parse(), text)
    except RecursionError:
        raise ProfileSyntaxError("expression nested too deeply", 0, text) from None


@dataclass(frozen=True)
class DerivativeValue:
    values: np.ndarray
    one_sided: np.ndarray  # True where the symbolic value was 0/0 (abs kink)


def differentiate(expr: ProfileExpr, order: int = 1) -> ProfileExpr:
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    node = expr.ast
    for _ in range(order):
        node = _d(node)
    return ProfileExpr(node, f"d{order}({expr.source_text})")


def derivative_value(expr: ProfileExpr, r, order: int = 1, side: int = 1) -> DerivativeValue:
    """Evaluate the order-th derivative, with one-sided values at abs kinks."""
    dexpr = differentiate(expr, order)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    vals = np.array(dexpr(r), dtype=float, copy=True)
    bad = ~np.isfinite(vals) & np.isfinite(expr(r)) if expr.has_abs else np.zeros(r.shape, bool)
    if bad.any():
        step = 1e-9 * np.maximum(1.0, np.abs(r[bad]))
        vals[bad] = dexpr(r[bad] + side * step)
    return DerivativeValue(vals, bad)


# ---------------------------------------------------------------------------
# Profile algebra


class Profile:
    """Real function of r with derivatives up to order 3."""

    def __call__(self, r):
        return self.d(r, 0)

    def d(self, r, order: int = 0):
        raise NotImplementedError

    def breakpoints(self) -> tuple:
        """Points where a derivative of order <= 2 may jump or blends start."""
        return ()

    def blend_windows(self) -> tuple:
        return ()

    def derivative(self, order: int = 1) -> "Profile":
        return Derivative(self, order)

    def __add__(self, other):
        return Sum((self, as_profile(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return Sum((self, Scale(-1.0, as_profile(other))))

    def __rsub__(self, other):
        return Sum((as_profile(other), Scale(-1.0, self)))

    def __neg__(self):
        return Scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Scale(float(other), self)
        return Product(self, as_profile(other))

    __rmul__ = __mul__

    def compose(self, inner: "Profile") -> "Profile":
        return Compose(self, inner)


def as_profile(obj) -> Profile:
    if isinstance(obj, Profile):
        return obj
    if isinstance(obj, (int, float)):
        return ExprProfile(ProfileExpr(Num(float(obj)), repr(float(obj))))
    if isinstance(obj, ProfileExpr):
        return ExprProfile(obj)
    if isinstance(obj, str):
        return ExprProfile(parse_profile(obj))
    raise TypeError(f"cannot make a profile from {type(obj).__name__}")


def expr(text: str) -> "ExprProfile":
    return ExprProfile(parse_profile(text))


class ExprProfile(Profile):
    def __init__(self, e: ProfileExpr):
        self.expr = e
        self._ders = [e]

    def _der(self, k):
        while len(self._ders) <= k:
            self._ders.append(differentiate(self._ders[-1], 1))
        return self._ders[k]

    def d(self, r, order=0):
        r = np.asarray(r, dtype=float)
        out = np.asarray(self._der(order)(r), dtype=float)
        if order and self.expr.has_abs:
            bad = ~np.isfinite(out)
            if bad.any():
                out = np.array(out, dtype=float, copy=True)
                rb = r if r.ndim == 0 else r[bad]
                out_b = self._der(order)(rb + 1e-9 * np.maximum(1.0, np.abs(rb)))
                if out.ndim == 0:
                    out = np.float64(out_b)
                else:
                    out[bad] = out_b
        return out

    def text(self) -> str:
        return render(self.expr.ast)

    def __repr__(self):
        return f"ExprProfile({self.expr.source_text or self.text()!r})"


class Sum(Profile):
    def __init__(self, terms: Sequence[Profile]):
        flat = []
        for t in terms:
            flat.extend(t.terms if isinstance(t, Sum) else [t])
        self.terms = tuple(flat)

    def d(self, r, order=0):
        return sum(t.d(r, order) for t in self.terms)

    def breakpoints(self):
        return tuple(sorted(set().union(*[t.breakpoints() for t in self.terms])))

    def blend_windows(self):
        return tuple(w for t in self.terms for w in t.blend_windows())


class Scale(Profile):
    def __init__(self, c: float, p: Profile):
        self.c, self.p = float(c), p

    def d(self, r, order=0):
        return self.c * self.p.d(r, order)

    def breakpoints(self):
        return self.p.breakpoints()

    def blend_windows(self):
        return self.p.blend_windows()


class Product(Profile):
    def __init__(self, a: Profile, b: Profile):
        self.a, self.b = a, b

    def d(self, r, order=0):
        return sum(math.comb(order, k) * self.a.d(r, k) * self.b.d(r, order - k)
                   for k in range(order + 1))

    def breakpoints(self):
        return tuple(sorted(set(self.a.breakpoints()) | set(self.b.breakpoints())))

    def blend_windows(self):
        return self.a.blend_windows() + self.b.blend_windows()


class Compose(Profile):
    """outer(inner(r)); chain rule up to order 3."""

    def __init__(self, outer: Profile, inner: Profile):
        self.outer, self.inner = outer, inner

    def d(self, r, order=0):
        g = self.inner.d(r, 0)
        if order == 0:
            return self.outer.d(g, 0)
        g1 = self.inner.d(r, 1)
        if order == 1:
            return self.outer.d(g, 1) * g1
        g2 = self.inner.d(r, 2)
        if order == 2:
            return self.outer.d(g, 2) * g1 ** 2 + self.outer.d(g, 1) * g2
        if order == 3:
            g3 = self.inner.d(r, 3)
            return (self.outer.d(g, 3) * g1 ** 3 + 3 * self.outer.d(g, 2) * g1 * g2
                    + self.outer.d(g, 1) * g3)
        raise ValueError("composition derivatives limited to order 3")

    def breakpoints(self):
        # breakpoints of the outer profile pulled back are not tracked exactly;
        # the inner profile's are the ones quadrature needs
        return self.inner.breakpoints()

    def blend_windows(self):
        return self.inner.blend_windows()


class Derivative(Profile):
    def __init__(self, p: Profile, k: int):
        self.p, self.k = p, int(k)

    def d(self, r, order=0):
        return self.p.d(r, order + self.k)

    def breakpoints(self):
        return self.p.breakpoints()

    def blend_windows(self):
        return self.p.blend_windows()


class Affine(Profile):
    """c0 + c1*r, cheap to evaluate (used for reparametrisations)."""

    def __init__(self, c0: float, c1: float):
        self.c0, self.c1 = float(c0), float(c1)

    def d(self, r, order=0):
        r = np.asarray(r, dtype=float)
        if order == 0:
            return self.c0 + self.c1 * r
        if order == 1:
            return np.full(r.shape, self.c1) if r.ndim else np.float64(self.c1)
        return np.zeros(r.shape) if r.ndim else np.float64(0.0)


class Callable1D(Profile):
    """Profile backed by a python callable returning derivatives."""

    def __init__(self, fn: Callable, name: str = "callable", breaks: tuple = ()):
        self.fn, self.name, self._breaks = fn, name, tuple(breaks)

    def d(self, r, order=0):
        return self.fn(np.asarray(r, dtype=float), order)

    def breakpoints(self):
        return self._breaks


# ---------------------------------------------------------------------------
# Piecewise profiles with blends

_BLEND_KINDS = ("exact-match", "monotone-cubic", "quintic")

# smoothstep weights as polynomials in u in [0, 1]
_STEP = {
    "quintic": np.polynomial.Polynomial([0, 0, 0, 10, -15, 6]),
    "monotone-cubic": np.polynomial.Polynomial([0, 0, 3, -2]),
}


@dataclass(frozen=True)
class BlendSpec:
    at: float
    kind: str = "exact-match"
    halfwidth: float = 0.0
    monotone: str | None = None   # "increasing" | "decreasing" | None
    sign: str | None = None       # "positive" | "nonnegative" | None
    c1: bool = False              # demand C1 at an exact-match join


@dataclass(frozen=True)
class _Segment:
    lo: float
    hi: float
    left: int
    right: int  # == left for plain pieces
    kind: str = "piece"


class PiecewiseProfile(Profile):
    """Ordered pieces on [a, b] joined exactly or through blend windows.

    On a blend window [c-w, c+w] the value is (1-s)L + sR with s a smoothstep
    weight and L, R the neighbouring pieces (extended into the window).  The
    window either abuts both pieces at c or exactly covers the gap between
    them.  Being a convex combination, the blend lies between L and R.
    """

    def __init__(self, pieces, blends=(), check: bool = True):
        ps = []
        for lo, hi, p in pieces:
            lo, hi = float(lo), float(hi)
            if not hi > lo:
                raise PiecewiseError(f"empty piece [{lo}, {hi}]")
            ps.append((lo, hi, as_profile(p)))
        if not ps:
            raise PiecewiseError("no pieces")
        ps.sort(key=lambda t: t[0])
        self.pieces = tuple(ps)
        self.blends = tuple(blends)
        self.domain = (ps[0][0], ps[-1][1])
        self.segments = self._layout()
        self._los = np.array([s.lo for s in self.segments])
        self._los_list = [float(x) for x in self._los]
        if check:
            self.validate()

    # -- layout ---------------------------------------------------------
    def _layout(self):
        ps = self.pieces
        by_join = {}
        for b in self.blends:
            if b.kind not in _BLEND_KINDS:
                raise PiecewiseError(f"unknown blend kind {b.kind!r}")
            best = None
            for k in range(len(ps) - 1):
                gap_lo, gap_hi = ps[k][1], ps[k + 1][0]
                tol = 1e-12 * max(1.0, abs(b.at))
                if gap_lo - tol <= b.at <= gap_hi + tol:
                    best = k
            if best is None:
                raise PiecewiseError(f"blend at {b.at} is not at a breakpoint or gap")
            by_join[best] = b
        segs = []
        start_override = None
        for k, (lo, hi, _) in enumerate(ps):
            seg_lo = lo if start_override is None else start_override
            start_override = None
            seg_hi = hi
            if k < len(ps) - 1:
                nlo = ps[k + 1][0]
                gap = nlo - hi
                tol = 1e-12 * max(1.0, abs(hi))
                if gap < -tol:
                    raise PiecewiseError(f"pieces overlap on [{nlo}, {hi}]")
                b = by_join.get(k)
                if gap > tol:
                    if b is None or b.kind == "exact-match":
                        raise PiecewiseError(f"gap [{hi}, {nlo}] not covered by a blend")
                    if (abs(b.at - b.halfwidth - hi) > 1e-9 * max(1, abs(hi))
                            or abs(b.at + b.halfwidth - nlo) > 1e-9 * max(1, abs(nlo))):
                        raise PiecewiseError(
                            f"blend window [{b.at - b.halfwidth}, {b.at + b.halfwidth}] "
                            f"does not cover gap [{hi}, {nlo}]")
                    segs.append(_Segment(seg_lo, hi, k, k))
                    segs.append(_Segment(hi, nlo, k, k + 1, b.kind))
                    continue
                if b is not None and b.kind != "exact-match":
                    w = b.halfwidth
                    if not (w > 0 and hi - w > seg_lo and hi + w < ps[k + 1][1]):
                        raise PiecewiseError(f"blend half-width {w} at {hi} too large")
                    segs.append(_Segment(seg_lo, hi - w, k, k))
                    segs.append(_Segment(hi - w, hi + w, k, k + 1, b.kind))
                    start_override = hi + w
                    continue
            segs.append(_Segment(seg_lo, seg_hi, k, k))
        self._joins = by_join
        return tuple(segs)

    # -- evaluation -----------------------------------------------------
    def _seg_index(self, r):
        idx = np.searchsorted(self._los, r, side="right") - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def _eval_seg(self, seg: _Segment, r, order):
        L = self.pieces[seg.left][2]
        if seg.kind == "piece":
            return L.d(r, order)
        R = self.pieces[seg.right][2]
        width = seg.hi - seg.lo
        u = (r - seg.lo) / width
        step = _STEP[seg.kind]
        # B = L + s (R - L); Leibniz for derivatives
        out = L.d(r, order)
        for k in range(order + 1):
            sk = step.deriv(k)(u) / width ** k if k else step(u)
            out = out + math.comb(order, k) * sk * (R.d(r, order - k) - L.d(r, order - k))
        return out

    def d(self, r, order=0):
        scalar = np.ndim(r) == 0
        if scalar:
            v = self._d_scalar(float(r), order)
            if v is not None:
                return v
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.full(r.shape, np.nan)
        idx = self._seg_index(r)
        inside = (r >= self.domain[0] - 1e-12) & (r <= self.domain[1] + 1e-12)
        with np.errstate(all="ignore"):
            for s in np.unique(idx[inside]):
                mask = inside & (idx == s)
                out[mask] = self._eval_seg(self.segments[s], r[mask], order)
            # at a shared endpoint fall back to the left neighbour if needed
            bad = inside & ~np.isfinite(out)
            if bad.any():
                for n in np.nonzero(bad)[0]:
                    s = idx[n]
                    if s > 0 and abs(r[n] - self.segments[s].lo) <= 1e-12 * max(1, abs(r[n])):
                        out[n] = self._eval_seg(self.segments[s - 1], r[n:n + 1], order)[0]
        return out[0] if scalar else out

    def _d_scalar(self, x, order):
        """One point without array bookkeeping; None defers to the general path."""
        if not self.domain[0] - 1e-12 <= x <= self.domain[1] + 1e-12:
            return None
        s = min(max(bisect.bisect_right(self._los_list, x) - 1, 0), len(self.segments) - 1)
        with np.errstate(all="ignore"):
            v = float(self._eval_seg(self.segments[s], x, order))
        return v if math.isfinite(v) else None

    def breakpoints(self):
        pts = set()
        for s in self.segments:
            pts.add(s.lo)
            pts.add(s.hi)
        for _, _, p in self.pieces:
            pts.update(p.breakpoints())
        return tuple(sorted(pts))

    def blend_windows(self):
        return tuple((s.lo, s.hi) for s in self.segments if s.kind != "piece")

    def on_blend(self, r):
        r = np.asarray(r, dtype=float)
        m = np.zeros(r.shape, bool)
        for lo, hi in self.blend_windows():
            m |= (r > lo) & (r < hi)
        return m

    # -- checks ---------------------------------------------------------
    def validate(self):
        """Check continuity at joins and declared blend side-conditions."""
        for k, (lo, hi, p) in enumerate(self.pieces[:-1]):
            q = self.pieces[k + 1]
            b = self._joins.get(k)
            if q[0] - hi > 1e-12 * max(1, abs(hi)):
                continue  # gap, covered by a blend
            if b is not None and b.kind != "exact-match":
                continue
            with np.errstate(all="ignore"):
                vl, vr = float(p.d(hi, 0)), float(q[2].d(hi, 0))
            if not (np.isfinite(vl) and np.isfinite(vr)) or abs(vl - vr) > TOL_C0 * max(1.0, abs(vl)):
                raise PiecewiseError(f"C0 violation at r={hi}: {vl} vs {vr}")
            if b is not None and b.c1:
                dl, dr = float(p.d(hi, 1)), float(q[2].d(hi, 1))
                if abs(dl - dr) > TOL_C1 * max(1.0, abs(dl)):
                    raise PiecewiseError(f"C1 violation at r={hi}: {dl} vs {dr}")
        for s in self.segments:
            if s.kind == "piece":
                continue
            b = self._joins[s.left]
            x = np.linspace(s.lo, s.hi, 257)
            v = self.d(x, 0)
            if not np.all(np.isfinite(v)):
                raise PiecewiseError(f"blend on [{s.lo}, {s.hi}] is not finite")
            if b.monotone:
                dv = self.d(x, 1)
                sgn = 1 if b.monotone == "increasing" else -1
                if np.any(sgn * dv < -1e-9):
                    raise PiecewiseError(f"blend on [{s.lo}, {s.hi}] not {b.monotone}")
            if b.sign == "positive" and np.any(v <= 0):
                raise PiecewiseError(f"blend on [{s.lo}, {s.hi}] not positive")
            if b.sign == "nonnegative" and np.any(v < 0):
                raise PiecewiseError(f"blend on [{s.lo}, {s.hi}] negative")

    def sandwich_gap(self, n: int = 257) -> float:
        """Largest amount by which a blend leaves its envelopes (<= 0 is good)."""
        worst = -np.inf
        for s in self.segments:
            if s.kind == "piece":
                continue
            x = np.linspace(s.lo, s.hi, n)
            L = self.pieces[s.left][2].d(x, 0)
            R = self.pieces[s.right][2].d(x, 0)
            B = self.d(x, 0)
            gap = np.maximum(B - np.maximum(L, R), np.minimum(L, R) - B)
            worst = max(worst, float(np.max(gap)))
        return worst

    # -- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        pieces = []
        for lo, hi, p in self.pieces:
            if not isinstance(p, ExprProfile):
                raise TypeError("only expression pieces can be serialised")
            pieces.append({"from": lo, "to": hi, "expr": p.expr.source_text or p.text()})
        blends = [{"at": b.at, "kind": b.kind, "halfwidth": b.halfwidth} for b in self.blends]
        return {"pieces": pieces, "blends": blends}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_piecewise(pieces, blend_spec=()) -> PiecewiseProfile:
    """pieces: [(a, b, expr-or-text-or-Profile)]; blend_spec: [BlendSpec | dict]."""
    blends = [b if isinstance(b, BlendSpec) else BlendSpec(**b) for b in blend_spec]
    return PiecewiseProfile(pieces, blends)


def profile_from_obj(obj) -> Profile:
    """Profile from JSON-like data: a number, expression text or piecewise dict."""
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return as_profile(float(obj))
    if isinstance(obj, str):
        return expr(obj)
    if isinstance(obj, dict) and "pieces" in obj:
        pieces = []
        for k, pc in enumerate(obj["pieces"]):
            try:
                pieces.append((float(pc["from"]), float(pc["to"]), expr(pc["expr"])))
            except KeyError as e:
                raise PiecewiseError(f"piece {k} missing key {e}") from None
        blends = []
        for b in obj.get("blends", []):
            blends.append(BlendSpec(float(b["at"]), b.get("kind", "quintic"),
                                    float(b.get("halfwidth", 0.0)),
                                    b.get("monotone"), b.get("sign"), bool(b.get("c1", False))))
        return PiecewiseProfile(pieces, blends)
    raise PiecewiseError("profile must be a number, an expression string or a piecewise object")


def profile_to_obj(p: Profile):
    if isinstance(p, ExprProfile):
        return p.expr.source_text or p.text()
    if isinstance(p, PiecewiseProfile):
        return p.to_dict()
    raise TypeError("profile is composite and has no closed-form serialisation")


def check_domain(p: Profile, lo: float, hi: float, n: int = 513, open_ends=(True, True)) -> None:
    """Raise ProfileDomainError unless p is finite on a sample of [lo, hi]."""
    x = np.linspace(lo, hi, n)
    if open_ends[0]:
        x = x[1:]
    if open_ends[1]:
        x = x[:-1]
    with np.errstate(all="ignore"):
        v = np.asarray(p(x), dtype=float)
    bad = ~np.isfinite(v)
    if bad.any():
        raise ProfileDomainError(f"profile not finite at r={x[bad][0]:.6g}")


# ---------------------------------------------------------------------------
# Mollification


def _bump_g(z):
    return 1.0 / (z * z - 1.0)


def _bump_raw(z, order=0):
    """Derivatives of exp(1/(z^2-1)) on (-1,1), zero outside."""
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape)
    m = np.abs(z) < 1
    zz = z[m]
    q = zz * zz - 1.0
    e = np.exp(1.0 / q)
    g1 = -2 * zz / q ** 2
    if order == 0:
        v = e
    elif order == 1:
        v = e * g1
    elif order == 2:
        g2 = (6 * zz ** 2 + 2) / q ** 3
        v = e * (g2 + g1 ** 2)
    elif order == 3:
        g2 = (6 * zz ** 2 + 2) / q ** 3
        g3 = -24 * zz * (zz ** 2 + 1) / q ** 4
        v = e * (g3 + 3 * g1 * g2 + g1 ** 3)
    else:
        raise ValueError("kernel derivatives limited to order 3")
    out[m] = v
    return out


def _bump_mass():
    from scipy.integrate import quad
    val, _ = quad(lambda z: math.exp(1.0 / (z * z - 1.0)), -1, 1, epsabs=1e-14, epsrel=1e-13)
    return val


BUMP_MASS = _bump_mass()


def bump_kernel(x, width: float = 1.0, order: int = 0):
    """phi_w(x) = phi(x/w)/w with unit mass, and its derivatives."""
    x = np.asarray(x, dtype=float)
    return _bump_raw(x / width, order) / (BUMP_MASS * width ** (order + 1))


class MollifiedProfile(Profile):
    """Convolution phi_w * base, by Gauss-Legendre split at known kinks."""

    def __init__(self, base: Profile, width: float, kinks: Sequence[float] = (), nodes: int = 96):
        if not width > 0:
            raise ValueError("mollifier width must be positive")
        self.base, self.width = base, float(width)
        self.kinks = tuple(sorted(float(k) for k in kinks))
        self._gx, self._gw = np.polynomial.legendre.leggauss(nodes)

    def d(self, r, order=0):
        scalar = np.ndim(r) == 0
        r = np.atleast_1d(np.asarray(r, dtype=float))
        w = self.width
        # split points in z for each r: z* = (r - kink)/w, kept inside (-1, 1)
        cuts = [np.full(r.shape, -1.0)]
        for k in self.kinks:
            cuts.append(np.clip((r - k) / w, -1.0, 1.0))
        cuts.append(np.full(r.shape, 1.0))
        cuts = np.sort(np.stack(cuts, axis=1), axis=1)
        total = np.zeros(r.shape)
        for a in range(cuts.shape[1] - 1):
            lo, hi = cuts[:, a:a + 1], cuts[:, a + 1:a + 2]
            half = 0.5 * (hi - lo)
            z = 0.5 * (hi + lo) + half * self._gx[None, :]
            kern = _bump_raw(z, order) / BUMP_MASS
            vals = self.base.d(r[:, None] - w * z, 0)
            # d^k/dr^k of int phi(z) u(r - w z) dz = w^-k int phi^(k)(z) u(r - w z) dz
            total += np.sum(kern * vals * self._gw[None, :] * half, axis=1)
        total = total / w ** order
        return total[0] if scalar else total


def mollify(profile: Profile, width: float, domain=None, kinks=()) -> PiecewiseProfile:
    """Smooth ``profile`` by the unit-mass bump of half-width ``width``.

    Returned as a single-piece PiecewiseProfile on ``domain`` (default
    [-10, 10]); the base must be evaluable on the domain widened by width.
    """
    lo, hi = domain if domain is not None else (-10.0, 10.0)
    return PiecewiseProfile([(lo, hi, MollifiedProfile(as_profile(profile), width, kinks))], check=False)
