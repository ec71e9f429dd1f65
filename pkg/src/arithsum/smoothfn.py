"""A tiny expression language for the summand f, with Taylor-mode derivatives.

Grammar (EBNF; whitespace is insignificant)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;
    atom    = number | "x" | "y" | "pi" | func , "(" , expr , ")" | "(" , expr , ")" ;
    func    = "exp" | "log" | "sin" | "cos" | "sqrt" ;
    number  = digit , { digit } , [ "." , { digit } ] , [ ("e" | "E") , [ "+" | "-" ] , digit , { digit } ]
            | "." , digit , { digit } , [ exponent ] ;

Power binds tighter than unary minus (``-x^2`` is ``-(x^2)``) and is right
associative.  ``y`` is only accepted by bivariate functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
DEFAULT_MAX_ORDER = 16


class ExpressionError(ValueError):
    pass


class ParseError(ExpressionError):
    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at byte offset {offset}{detail}")


class UnknownIdentifierError(ParseError):
    pass


class DomainError(ExpressionError, ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, BinOp, Call]


def Add(a, b):
    return BinOp("+", a, b)


def Sub(a, b):
    return BinOp("-", a, b)


def Mul(a, b):
    return BinOp("*", a, b)


def Div(a, b):
    return BinOp("/", a, b)


def Pow(a, b):
    return BinOp("^", a, b)


def variables(e: Expression) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, (Neg, Call)):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


# ---------------------------------------------------------------------------
# parser


def _tokenize(src: str):
    toks = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
        elif c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == ".":
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    while k < n and src[k].isdigit():
                        k += 1
                    j = k
            toks.append(("num", src[i:j], i))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(("id", src[i:j], i))
            i = j
        elif c in "+-*/^()":
            toks.append((c, c, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {c!r}", _byte_offset(src, i))
    toks.append(("end", "", n))
    return toks


def _byte_offset(src: str, i: int) -> int:
    return len(src[:i].encode("utf-8"))


class _Parser:
    def __init__(self, src: str, names):
        self.src = src
        self.toks = _tokenize(src)
        self.pos = 0
        self.names = names

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, expected):
        kind, text, at = self.peek()
        what = "end of input" if kind == "end" else f"token {text!r}"
        raise ParseError(f"unexpected {what}", _byte_offset(self.src, at), expected)

    def expect(self, kind):
        if self.peek()[0] != kind:
            self.fail({kind})
        return self.take()

    def parse(self) -> Expression:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail({"+", "-", "*", "/", "^", "end of input"})
        return e

    def expr(self):
        left = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.peek()[0] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, at = self.peek()
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        if kind == "id":
            self.take()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text == "pi":
                return Num(math.pi)
            if text in self.names:
                return Var(text)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", _byte_offset(self.src, at))
        self.fail({"number", "identifier", "(", "-"})


def parse(source: str, variables=("x",)) -> Expression:
    """Parse ``source`` into an AST; ``variables`` lists the admissible names."""
    return _Parser(source, frozenset(variables)).parse()


def to_source(e: Expression) -> str:
    """Print with full parenthesisation so that ``parse(to_source(e)) == e``."""
    if isinstance(e, Num):
        if e.value < 0 or not math.isfinite(e.value):
            raise ExpressionError("literals must be finite and non-negative")
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.arg)})"
    if isinstance(e, Call):
        return f"{e.name}({to_source(e.arg)})"
    return f"({to_source(e.left)} {e.op} {to_source(e.right)})"


# ---------------------------------------------------------------------------
# plain evaluation


def _const_value(e: Expression):
    """Value of a variable-free subtree, else None."""
    if variables(e):
        return None
    return float(evaluate(e, {}))


def _int_exponent(q):
    if q is not None and q == round(q) and abs(q) <= 64:
        return int(round(q))
    return None


def evaluate(e: Expression, env: dict):
    """Evaluate with numpy semantics; raises DomainError on non-real results."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Call):
        v = evaluate(e.arg, env)
        if e.name == "log":
            if np.any(np.asarray(v) <= 0):
                raise DomainError("log of a non-positive value")
            return np.log(v)
        if e.name == "sqrt":
            if np.any(np.asarray(v) < 0):
                raise DomainError("sqrt of a negative value")
            return np.sqrt(v)
        return getattr(np, e.name)(v)
    left = evaluate(e.left, env)
    if e.op == "^":
        q = _const_value(e.right)
        p = _int_exponent(q)
        if p is not None:
            if p < 0 and np.any(np.asarray(left) == 0):
                raise DomainError("negative power of zero")
            return left ** p if p >= 0 else 1.0 / left ** (-p)
        if np.any(np.asarray(left) <= 0):
            raise DomainError("non-integer power needs a positive base")
        return left ** (q if q is not None else evaluate(e.right, env))
    right = evaluate(e.right, env)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if np.any(np.asarray(right) == 0):
        raise DomainError("division by zero")
    return left / right


# ---------------------------------------------------------------------------
# Taylor mode: arrays of shape (K+1, ...) holding f^(j)/j!


def _tmul(a, b):
    K = a.shape[0] - 1
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    for k in range(K + 1):
        out[k] = np.einsum("i...,i...->...", a[: k + 1], b[k::-1])
    return out


def _tdiv(a, b):
    K = a.shape[0] - 1
    if np.any(b[0] == 0):
        raise DomainError("division by zero")
    c = np.empty(np.broadcast_shapes(a.shape, b.shape))
    for k in range(K + 1):
        s = a[k] - np.einsum("i...,i...->...", c[:k], b[k:0:-1]) if k else a[0]
        c[k] = s / b[0]
    return c


def _texp(a):
    K = a.shape[0] - 1
    e = np.empty_like(a)
    e[0] = np.exp(a[0])
    j = np.arange(1, K + 1).reshape((-1,) + (1,) * (a.ndim - 1))
    for k in range(1, K + 1):
        e[k] = np.einsum("i...,i...->...", (j[:k] * a[1 : k + 1]), e[k - 1 :: -1]) / k
    return e


def _tlog(a):
    K = a.shape[0] - 1
    if np.any(a[0] <= 0):
        raise DomainError("log of a non-positive value")
    out = np.empty_like(a)
    out[0] = np.log(a[0])
    j = np.arange(1, K + 1).reshape((-1,) + (1,) * (a.ndim - 1))
    for k in range(1, K + 1):
        s = np.einsum("i...,i...->...", j[: k - 1] * out[1:k], a[k - 1 : 0 : -1]) if k > 1 else 0.0
        out[k] = (a[k] - s / k) / a[0]
    return out


def _tsincos(a):
    K = a.shape[0] - 1
    s = np.empty_like(a)
    c = np.empty_like(a)
    s[0], c[0] = np.sin(a[0]), np.cos(a[0])
    j = np.arange(1, K + 1).reshape((-1,) + (1,) * (a.ndim - 1))
    for k in range(1, K + 1):
        ja = j[:k] * a[1 : k + 1]
        s[k] = np.einsum("i...,i...->...", ja, c[k - 1 :: -1]) / k
        c[k] = -np.einsum("i...,i...->...", ja, s[k - 1 :: -1]) / k
    return s, c


def _tpow_real(a, q):
    """a^q for real q; needs a[0] > 0."""
    K = a.shape[0] - 1
    if np.any(a[0] <= 0):
        raise DomainError("non-integer power needs a positive base")
    p = np.empty_like(a)
    p[0] = a[0] ** q
    for k in range(1, K + 1):
        j = np.arange(1, k + 1).reshape((-1,) + (1,) * (a.ndim - 1))
        coef = q * j - (k - j)
        p[k] = np.einsum("i...,i...->...", coef * a[1 : k + 1], p[k - 1 :: -1]) / (k * a[0])
    return p


def _tpow_int(a, p):
    if p == 0:
        out = np.zeros_like(a)
        out[0] = 1.0
        return out
    base = a if p > 0 else None
    if p < 0:
        one = np.zeros_like(a)
        one[0] = 1.0
        base = _tdiv(one, a)
        p = -p
    result = None
    while p:
        if p & 1:
            result = base if result is None else _tmul(result, base)
        p >>= 1
        if p:
            base = _tmul(base, base)
    return result


def taylor(e: Expression, x, order: int):
    """Normalised Taylor coefficients f^(j)(x)/j!, shape (order+1, *x.shape)."""
    x = np.asarray(x, dtype=float)
    seed = np.zeros((order + 1,) + x.shape)
    seed[0] = x
    if order >= 1:
        seed[1] = 1.0
    with np.errstate(all="ignore"):
        out = _taylor(e, seed, order)
    return np.broadcast_to(out, seed.shape)


def _const_series(v, like):
    out = np.zeros_like(like)
    out[0] = v
    return out


def _taylor(e, seed, order):
    if isinstance(e, Num):
        return _const_series(e.value, seed)
    if isinstance(e, Var):
        if e.name != "x":
            raise ExpressionError(f"variable {e.name!r} is not available here")
        return seed
    if isinstance(e, Neg):
        return -_taylor(e.arg, seed, order)
    if isinstance(e, Call):
        a = _taylor(e.arg, seed, order)
        if e.name == "exp":
            return _texp(a)
        if e.name == "log":
            return _tlog(a)
        if e.name == "sin":
            return _tsincos(a)[0]
        if e.name == "cos":
            return _tsincos(a)[1]
        return _tpow_real(a, 0.5)
    left = _taylor(e.left, seed, order)
    if e.op == "^":
        q = _const_value(e.right)
        p = _int_exponent(q)
        if p is not None:
            if p < 0 and np.any(left[0] == 0):
                raise DomainError("negative power of zero")
            return _tpow_int(left, p)
        if q is not None:
            return _tpow_real(left, q)
        return _texp(_tmul(_taylor(e.right, seed, order), _tlog(left)))
    right = _taylor(e.right, seed, order)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return _tmul(left, right)
    return _tdiv(left, right)


# ---------------------------------------------------------------------------
# bivariate first-order jets: value, d/dx, d/dy, d2/dxdy


class _Jet:
    __slots__ = ("v", "x", "y", "xy")

    def __init__(self, v, x, y, xy):
        self.v, self.x, self.y, self.xy = v, x, y, xy

    @classmethod
    def const(cls, c):
        return cls(c, 0.0, 0.0, 0.0)

    def __add__(self, o):
        return _Jet(self.v + o.v, self.x + o.x, self.y + o.y, self.xy + o.xy)

    def __sub__(self, o):
        return _Jet(self.v - o.v, self.x - o.x, self.y - o.y, self.xy - o.xy)

    def __neg__(self):
        return _Jet(-self.v, -self.x, -self.y, -self.xy)

    def __mul__(self, o):
        return _Jet(self.v * o.v, self.x * o.v + self.v * o.x, self.y * o.v + self.v * o.y,
                    self.xy * o.v + self.x * o.y + self.y * o.x + self.v * o.xy)

    def chain(self, d0, d1, d2):
        """phi(self) given phi, phi', phi'' at self.v."""
        return _Jet(d0, d1 * self.x, d1 * self.y, d1 * self.xy + d2 * self.x * self.y)


def _jet(e, env):
    if isinstance(e, Num):
        return _Jet.const(e.value)
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_jet(e.arg, env)
    if isinstance(e, Call):
        a = _jet(e.arg, env)
        v = a.v
        if e.name == "exp":
            ev = np.exp(v)
            return a.chain(ev, ev, ev)
        if e.name == "log":
            if np.any(np.asarray(v) <= 0):
                raise DomainError("log of a non-positive value")
            return a.chain(np.log(v), 1 / v, -1 / v**2)
        if e.name == "sin":
            return a.chain(np.sin(v), np.cos(v), -np.sin(v))
        if e.name == "cos":
            return a.chain(np.cos(v), -np.sin(v), -np.cos(v))
        if np.any(np.asarray(v) <= 0):
            raise DomainError("sqrt needs a positive argument for derivatives")
        r = np.sqrt(v)
        return a.chain(r, 0.5 / r, -0.25 / (r * v))
    left = _jet(e.left, env)
    if e.op == "^":
        q = _const_value(e.right)
        p = _int_exponent(q)
        if p is not None and p >= 0:
            out = _Jet.const(1.0)
            for _ in range(p):
                out = out * left
            return out
        if np.any(np.asarray(left.v) <= 0) and p is None:
            raise DomainError("non-integer power needs a positive base")
        if q is not None:
            v = left.v
            if np.any(np.asarray(v) == 0):
                raise DomainError("negative power of zero")
            return left.chain(v**q, q * v ** (q - 1), q * (q - 1) * v ** (q - 2))
        lg = left.chain(np.log(left.v), 1 / left.v, -1 / left.v**2)
        prod = _jet(e.right, env) * lg
        ev = np.exp(prod.v)
        return prod.chain(ev, ev, ev)
    right = _jet(e.right, env)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    # a / b = a * b^-1
    v = right.v
    if np.any(np.asarray(v) == 0):
        raise DomainError("division by zero")
    return left * right.chain(1 / v, -1 / v**2, 2 / v**3)


# ---------------------------------------------------------------------------
# smooth functions


@dataclass(frozen=True)
class SmoothFunction:
    """f on a closed interval, with derivatives guaranteed finite up to ``max_order``.

    Construction samples the interval (endpoints included) at ``max_order`` and
    rejects expressions that are not finite there.
    """

    expression: Expression
    domain: tuple[float, float]
    max_order: int = DEFAULT_MAX_ORDER
    source: str = field(default="", compare=False)

    def __post_init__(self):
        a, b = self.domain
        if not a < b:
            raise ValueError("domain must satisfy a < b")
        if self.max_order < 0:
            raise ValueError("max_order must be non-negative")
        if not variables(self.expression) <= {"x"}:
            raise ExpressionError("univariate functions may only use x")
        grid = np.linspace(a, b, 65)
        try:
            d = taylor(self.expression, grid, self.max_order)
        except DomainError as exc:
            raise DomainError(f"{exc} on [{a}, {b}]") from None
        if not np.all(np.isfinite(d)):
            raise DomainError(f"derivatives up to order {self.max_order} are not finite on [{a}, {b}]")

    @classmethod
    def parse(cls, source: str, a: float, b: float, max_order: int = DEFAULT_MAX_ORDER):
        return cls(parse(source), (float(a), float(b)), max_order, source)

    def __call__(self, x):
        with np.errstate(all="ignore"):
            v = evaluate(self.expression, {"x": np.asarray(x, dtype=float)})
        return np.broadcast_to(v, np.shape(x)) * 1.0 if np.ndim(x) else float(v)

    def derivative_values(self, x, order: int):
        """Array of f^(j)(x) for j = 0..order, shape (order+1, *shape(x)); no domain check."""
        c = taylor(self.expression, x, order)
        scale = np.array([math.factorial(j) for j in range(order + 1)], dtype=float)
        return c * scale.reshape((-1,) + (1,) * (c.ndim - 1))

    def derivative(self, order: int):
        """A vectorised callable u -> f^(order)(u)."""
        self._check_order(order)
        if order == 0:
            return self
        return lambda u: self.derivative_values(u, order)[order]

    def _check_order(self, order):
        if order > self.max_order:
            raise ValueError(f"derivative order {order} exceeds max_order {self.max_order}")


def derivatives_at(f: SmoothFunction, x: float, order: int) -> list[float]:
    """[f(x), f'(x), ..., f^(order)(x)] in one Taylor-mode pass."""
    a, b = f.domain
    if not a <= x <= b:
        raise DomainError(f"x = {x} is outside the domain [{a}, {b}]")
    if order < 0:
        raise ValueError("order must be non-negative")
    f._check_order(order)
    d = f.derivative_values(np.array(float(x)), order)
    if not np.all(np.isfinite(d)):
        raise DomainError(f"non-finite derivative at x = {x}")
    return [float(v) for v in d]


def is_good_on(f: SmoothFunction, interval=None, samples: int = 257) -> tuple[bool, str]:
    """Certify the C^1 sufficient condition: f' exists and is finite on the interval.

    Bounded-variation inputs are outside what this checks and are reported as
    not certified.
    """
    a, b = interval if interval is not None else f.domain
    if f.max_order < 1:
        return False, "max_order < 1: no derivative is declared"
    grid = np.linspace(a, b, samples)
    try:
        d = taylor(f.expression, grid, 1)
    except DomainError as exc:
        return False, f"f' is not finite on [{a}, {b}]: {exc}"
    if not np.all(np.isfinite(d)):
        return False, f"f' is not finite on [{a}, {b}]"
    return True, "f is differentiable with a finite, integrable derivative (C^1)"


@dataclass(frozen=True)
class BivariateFunction:
    """f(x, y) with value, f_x, f_y and f_xy available through first-order jets."""

    expression: Expression
    source: str = field(default="", compare=False)

    @classmethod
    def parse(cls, source: str):
        return cls(parse(source, variables=("x", "y")), source)

    def __call__(self, x, y):
        with np.errstate(all="ignore"):
            v = evaluate(self.expression, {"x": np.asarray(x, float), "y": np.asarray(y, float)})
        return np.broadcast_to(v, np.broadcast_shapes(np.shape(x), np.shape(y))) * 1.0

    def partials(self, x, y):
        """(f, f_x, f_y, f_xy) evaluated on broadcast arrays."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        zero = np.zeros(shape)
        env = {"x": _Jet(x + zero, 1.0 + zero, zero, zero), "y": _Jet(y + zero, zero, 1.0 + zero, zero)}
        with np.errstate(all="ignore"):
            j = _jet(self.expression, env)
        out = tuple(np.broadcast_to(np.asarray(c, float), shape) for c in (j.v, j.x, j.y, j.xy))
        if not all(np.all(np.isfinite(c)) for c in out):
            raise DomainError("bivariate function or its partials are not finite")
        return out
