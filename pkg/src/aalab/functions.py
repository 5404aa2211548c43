"""Expression trees for deterministic functions of time (and optionally state).

Every node is vectorised: ``expr(t)`` accepts a scalar or an ndarray of times,
``expr(t, x)`` additionally accepts a state array of shape ``(..., d)``.  Trees
round-trip through a small text syntax parsed with :mod:`ast`::

    >>> f = parse("0.5*sin(t) + tanh(x)")
    >>> parse(str(f)) == f
    True

Catalog shortcuts: ``AP2(a, b)``, ``LEVITAN``, ``ERG1``, ``ERG2``.
"""

from __future__ import annotations

import ast
import math

import numpy as np

__all__ = [
    "Expr", "Const", "Time", "State", "Unary", "Recip", "Clip", "Add", "Mul",
    "Compose", "Sampled", "parse", "as_expr", "catalog", "AP2", "LEVITAN",
    "ERG1", "ERG2", "CATALOG_NAMES",
]

# 1/u is clamped to +-1e12 when |u| < 1e-12
RECIP_CLAMP = 1e-12


class Expr:
    """Base node. Subclasses implement ``_eval``, ``__str__`` and ``_key``."""

    def __call__(self, t, x=None):
        return self._eval(np.asarray(t, dtype=float), x)

    def _eval(self, t, x):
        raise NotImplementedError

    def _key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, Expr) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"Expr({str(self)!r})"

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __neg__(self):
        return Mul(Const(-1.0), self)

    def __sub__(self, other):
        return Add(self, -as_expr(other))

    def __rsub__(self, other):
        return Add(as_expr(other), -self)

    @property
    def uses_state(self):
        return any(c.uses_state for c in self.children())

    def children(self):
        return ()

    def lipschitz_x(self):
        """Upper bound on the Lipschitz constant in the state variable
        (Euclidean norm), or ``inf`` when none can be certified."""
        raise NotImplementedError

    def sup_bound(self):
        """Upper bound on ``|expr|`` over all (t, x), or ``inf``."""
        raise NotImplementedError


class Const(Expr):
    def __init__(self, value):
        self.value = float(value)

    def _eval(self, t, x):
        return np.full(np.shape(t), self.value) if np.ndim(t) else np.float64(self.value)

    def _key(self):
        return ("const", self.value)

    def __str__(self):
        return repr(self.value)

    def lipschitz_x(self):
        return 0.0

    def sup_bound(self):
        return abs(self.value)


class Time(Expr):
    """Affine time map ``a*t + b``."""

    def __init__(self, a=1.0, b=0.0):
        self.a = float(a)
        self.b = float(b)

    def _eval(self, t, x):
        return self.a * t + self.b

    def _key(self):
        return ("time", self.a, self.b)

    def __str__(self):
        if self.a == 1.0 and self.b == 0.0:
            return "t"
        if self.b == 0.0:
            return f"({self.a!r}*t)"
        return f"({self.a!r}*t + {self.b!r})"

    def lipschitz_x(self):
        return 0.0

    def sup_bound(self):
        return 0.0 if self.a == 0.0 and self.b == 0.0 else math.inf


class State(Expr):
    """Component ``k`` of the state vector."""

    def __init__(self, k=0):
        self.k = int(k)

    def _eval(self, t, x):
        if x is None:
            raise ValueError("expression uses the state variable but no state was given")
        x = np.asarray(x, dtype=float)
        return x[..., self.k]

    def _key(self):
        return ("state", self.k)

    def __str__(self):
        return f"x{self.k}"

    @property
    def uses_state(self):
        return True

    def lipschitz_x(self):
        return 1.0

    def sup_bound(self):
        return math.inf


_UNARY = {
    "sin": (np.sin, 1.0, 1.0),
    "cos": (np.cos, 1.0, 1.0),
    "tanh": (np.tanh, 1.0, 1.0),
    "exp": (np.exp, math.inf, math.inf),
    "abs": (np.abs, 1.0, None),
}


class Unary(Expr):
    def __init__(self, name, arg):
        if name not in _UNARY:
            raise ValueError(f"unknown primitive {name!r}")
        self.name = name
        self.arg = as_expr(arg)

    def _eval(self, t, x):
        return _UNARY[self.name][0](self.arg._eval(t, x))

    def _key(self):
        return (self.name, self.arg._key())

    def __str__(self):
        return f"{self.name}({self.arg})"

    def children(self):
        return (self.arg,)

    def lipschitz_x(self):
        inner = self.arg.lipschitz_x()
        if inner == 0.0:
            return 0.0
        slope = _UNARY[self.name][1]
        return slope * inner

    def sup_bound(self):
        bound = _UNARY[self.name][2]
        if bound is None:
            return self.arg.sup_bound()
        if self.name == "exp":
            return math.exp(self.arg.sup_bound()) if math.isfinite(self.arg.sup_bound()) else math.inf
        return bound


class Recip(Expr):
    """``1/u`` with ``|u|`` floored at ``floor`` (sign preserved, sign(0)=+1)."""

    def __init__(self, arg, floor=RECIP_CLAMP):
        if floor <= 0:
            raise ValueError("reciprocal floor must be positive")
        self.arg = as_expr(arg)
        self.floor = float(floor)

    def _eval(self, t, x):
        u = self.arg._eval(t, x)
        sign = np.where(u < 0, -1.0, 1.0)
        return sign / np.maximum(np.abs(u), self.floor)

    def _key(self):
        return ("recip", self.arg._key(), self.floor)

    def __str__(self):
        if self.floor == RECIP_CLAMP:
            return f"recip({self.arg})"
        return f"recip({self.arg}, {self.floor!r})"

    def children(self):
        return (self.arg,)

    def lipschitz_x(self):
        inner = self.arg.lipschitz_x()
        return 0.0 if inner == 0.0 else inner / self.floor**2

    def sup_bound(self):
        return 1.0 / self.floor


class Clip(Expr):
    """Clip-linear map ``min(max(u, lo), hi)``; 1-Lipschitz."""

    def __init__(self, arg, lo=-1.0, hi=1.0):
        self.arg = as_expr(arg)
        self.lo, self.hi = float(lo), float(hi)
        if self.lo > self.hi:
            raise ValueError("clip bounds reversed")

    def _eval(self, t, x):
        return np.clip(self.arg._eval(t, x), self.lo, self.hi)

    def _key(self):
        return ("clip", self.arg._key(), self.lo, self.hi)

    def __str__(self):
        return f"clip({self.arg}, {self.lo!r}, {self.hi!r})"

    def children(self):
        return (self.arg,)

    def lipschitz_x(self):
        return self.arg.lipschitz_x()

    def sup_bound(self):
        return max(abs(self.lo), abs(self.hi))


class Add(Expr):
    def __init__(self, left, right):
        self.left, self.right = as_expr(left), as_expr(right)

    def _eval(self, t, x):
        return self.left._eval(t, x) + self.right._eval(t, x)

    def _key(self):
        return ("add", self.left._key(), self.right._key())

    def __str__(self):
        return f"({self.left} + {self.right})"

    def children(self):
        return (self.left, self.right)

    def lipschitz_x(self):
        return self.left.lipschitz_x() + self.right.lipschitz_x()

    def sup_bound(self):
        return self.left.sup_bound() + self.right.sup_bound()


class Mul(Expr):
    def __init__(self, left, right):
        self.left, self.right = as_expr(left), as_expr(right)

    def _eval(self, t, x):
        return self.left._eval(t, x) * self.right._eval(t, x)

    def _key(self):
        return ("mul", self.left._key(), self.right._key())

    def __str__(self):
        return f"({self.left}*{self.right})"

    def children(self):
        return (self.left, self.right)

    def lipschitz_x(self):
        la, lb = self.left.lipschitz_x(), self.right.lipschitz_x()
        if la == 0.0 and lb == 0.0:
            return 0.0
        # product rule bound; needs sup bounds on the factors that vary
        total = 0.0
        if la:
            total += la * self.right.sup_bound()
        if lb:
            total += lb * self.left.sup_bound()
        return total

    def sup_bound(self):
        a, b = self.left.sup_bound(), self.right.sup_bound()
        if a == 0.0 or b == 0.0:
            return 0.0
        return a * b


class Compose(Expr):
    """``outer(inner(t, x), x)``: the time slot of ``outer`` is fed by ``inner``."""

    def __init__(self, outer, inner):
        self.outer, self.inner = as_expr(outer), as_expr(inner)

    def _eval(self, t, x):
        return self.outer._eval(np.asarray(self.inner._eval(t, x), dtype=float), x)

    def _key(self):
        return ("compose", self.outer._key(), self.inner._key())

    def __str__(self):
        return f"compose({self.outer}, {self.inner})"

    def children(self):
        return (self.outer, self.inner)

    def lipschitz_x(self):
        if self.inner.lipschitz_x() == 0.0:
            return self.outer.lipschitz_x()
        return math.inf

    def sup_bound(self):
        return self.outer.sup_bound()


class Sampled(Expr):
    """Grid samples, linearly interpolated (held constant beyond the ends)."""

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise ValueError("sampled function needs matching 1-d times/values, at least 2 points")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("sample values must be finite")
        self.times, self.values = times, values

    def _eval(self, t, x):
        return np.interp(t, self.times, self.values)

    def _key(self):
        return ("sampled", self.times.tobytes(), self.values.tobytes())

    def __str__(self):
        return f"sampled[{self.times.size} points on [{self.times[0]!r}, {self.times[-1]!r}]]"

    def lipschitz_x(self):
        return 0.0

    def sup_bound(self):
        return float(np.max(np.abs(self.values)))


def as_expr(value):
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Const(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an expression")


# -- catalog ---------------------------------------------------------------

def AP2(a=1.0, b=math.sqrt(2.0)):
    """``sin(a t) + sin(b t)``; almost periodic, quasi-periodic when a/b is irrational."""
    return Add(Unary("sin", Time(a)), Unary("sin", Time(b)))


def LEVITAN():
    """``sin(1/(2 + cos t + cos(sqrt2 t)))``: almost automorphic, not uniformly continuous."""
    u = Add(Add(Const(2.0), Unary("cos", Time())), Unary("cos", Time(math.sqrt(2.0))))
    return Unary("sin", Recip(u))


def ERG1():
    """``1/(1 + t^2)``."""
    return Recip(Add(Const(1.0), Mul(Time(), Time())))


def ERG2():
    """``exp(-|t|)``."""
    return Unary("exp", Mul(Const(-1.0), Unary("abs", Time())))


CATALOG_NAMES = ("AP2", "LEVITAN", "ERG1", "ERG2")


def catalog(name, *params):
    name = name.upper()
    if name == "AP2":
        return AP2(*params)
    if params:
        raise ValueError(f"{name} takes no parameters")
    try:
        return {"LEVITAN": LEVITAN, "ERG1": ERG1, "ERG2": ERG2}[name]()
    except KeyError:
        raise ValueError(f"unknown catalog entry {name!r}") from None


# -- text syntax -----------------------------------------------------------

_CONSTANTS = {"pi": math.pi, "e": math.e}


def parse(text):
    """Parse the text syntax into an expression tree.

    Names: ``t``, ``x`` (= ``x0``), ``x0``, ``x1``, ...; constants ``pi``,
    ``e``; calls: ``sin cos tanh exp abs sqrt2()``, ``recip(u[, floor])``,
    ``clip(u[, lo, hi])``, ``compose(outer, inner)`` and the catalog names.
    Operators: ``+ - * /`` and ``**`` with a small non-negative integer exponent.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"bad expression {text!r}: {exc.msg}") from None
    return _build(tree.body, text)


def _number(node, text):
    value = _build(node, text)
    if not isinstance(value, Const):
        raise ValueError(f"expected a numeric literal in {text!r}")
    return value.value


def _build(node, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return Const(node.value)
    if isinstance(node, ast.Name):
        if node.id == "t":
            return Time()
        if node.id == "x":
            return State(0)
        if node.id.startswith("x") and node.id[1:].isdigit():
            return State(int(node.id[1:]))
        if node.id in _CONSTANTS:
            return Const(_CONSTANTS[node.id])
        if node.id.upper() in CATALOG_NAMES:
            return catalog(node.id)
        raise ValueError(f"unknown name {node.id!r} in {text!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _build(node.operand, text)
        if isinstance(node.op, ast.UAdd):
            return inner
        if isinstance(inner, Const):
            return Const(-inner.value)
        return -inner
    if isinstance(node, ast.BinOp):
        left = _build(node.left, text)
        if isinstance(node.op, ast.Pow):
            power = _number(node.right, text)
            if power != int(power) or not 0 <= power <= 8:
                raise ValueError(f"only integer powers 0..8 are supported in {text!r}")
            result = Const(1.0)
            for i in range(int(power)):
                result = left if i == 0 else Mul(result, left)
            return result
        right = _build(node.right, text)
        if isinstance(node.op, ast.Add):
            if isinstance(left, Time) and isinstance(right, Const):
                return Time(left.a, left.b + right.value)
            return Add(left, right)
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            # keep affine time maps compact so str() round-trips
            if isinstance(left, Const) and isinstance(right, Time) and right.b == 0.0:
                return Time(left.value * right.a)
            return Mul(left, right)
        if isinstance(node.op, ast.Div):
            if isinstance(right, Const):
                return Mul(left, Const(1.0 / right.value))
            return Mul(left, Recip(right))
        raise ValueError(f"unsupported operator in {text!r}")
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        fname = node.func.id
        args = node.args
        if fname in _UNARY:
            if len(args) != 1:
                raise ValueError(f"{fname} takes one argument")
            return Unary(fname, _build(args[0], text))
        if fname == "recip":
            floor = _number(args[1], text) if len(args) > 1 else RECIP_CLAMP
            return Recip(_build(args[0], text), floor)
        if fname == "clip":
            bounds = [_number(a, text) for a in args[1:]] or [-1.0, 1.0]
            return Clip(_build(args[0], text), *bounds)
        if fname == "compose":
            return Compose(_build(args[0], text), _build(args[1], text))
        if fname.upper() in CATALOG_NAMES:
            return catalog(fname, *[_number(a, text) for a in args])
        raise ValueError(f"unknown function {fname!r} in {text!r}")
    raise ValueError(f"unsupported syntax in {text!r}")
