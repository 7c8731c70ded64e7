"""Expression trees for the scalar functions of an MPEC instance.

Trees are immutable.  Evaluation is exact (``fractions.Fraction``) as long
as the inputs are rational and no ``exp`` node is reached; everything else
falls back to floats.  A vectorized float evaluator backs the samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, DivisionByZero, DomainError

NARY = ("add", "mul", "max", "min")
UNARY = ("neg", "abs", "exp")
NONSMOOTH = ("abs", "max", "min")


def as_scalar(x):
    """Coerce ``x`` to a Fraction, keeping floats as floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise TypeError(f"cannot interpret {x!r} as a scalar")


def as_point(coords) -> tuple:
    return tuple(as_scalar(c) for c in coords)


def is_exact(x) -> bool:
    return isinstance(x, Fraction)


@dataclass(frozen=True)
class Expr:
    """One node of an expression tree.

    ``op`` is the node kind, ``args`` the child subtrees, ``value`` the
    payload for leaves (constant, variable index) and the exponent of
    ``pow`` nodes.
    """

    op: str
    args: tuple = ()
    value: object = None

    def __post_init__(self):
        op, args = self.op, self.args
        if op == "const":
            object.__setattr__(self, "value", as_scalar(self.value))
        elif op == "var":
            if not isinstance(self.value, int) or isinstance(self.value, bool) or self.value < 0:
                raise ValueError(f"variable index must be a nonnegative int, got {self.value!r}")
        elif op in NARY:
            if len(args) < 2:
                raise ValueError(f"{op} needs at least 2 children")
        elif op in UNARY:
            if len(args) != 1:
                raise ValueError(f"{op} takes exactly one child")
        elif op == "div":
            if len(args) != 2:
                raise ValueError("div takes (numerator, denominator)")
            den = args[1]
            if den.op == "const" and den.value == 0:
                raise ValueError("denominator is the constant 0")
        elif op == "pow":
            if len(args) != 1:
                raise ValueError("pow takes exactly one child")
            if not isinstance(self.value, int) or isinstance(self.value, bool) or self.value < 1:
                raise ValueError(f"pow exponent must be an int >= 1, got {self.value!r}")
        else:
            raise ValueError(f"unknown node kind {op!r}")
        for a in args:
            if not isinstance(a, Expr):
                raise TypeError(f"child of {op} is not an Expr: {a!r}")

    # operator sugar so tests and corpus builders read naturally
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return pow_(self, n)

    def __abs__(self):
        return abs_(self)

    def __repr__(self):
        return to_infix(self)


def _lift(x):
    return x if isinstance(x, Expr) else const(x)


def const(v) -> Expr:
    return Expr("const", (), v)


def var(i: int) -> Expr:
    return Expr("var", (), i)


def add(*children) -> Expr:
    return Expr("add", tuple(children))


def mul(*children) -> Expr:
    return Expr("mul", tuple(children))


def neg(child) -> Expr:
    return Expr("neg", (child,))


def div(num, den) -> Expr:
    return Expr("div", (num, den))


def abs_(child) -> Expr:
    return Expr("abs", (child,))


def max_(*children) -> Expr:
    return Expr("max", tuple(children))


def min_(*children) -> Expr:
    return Expr("min", tuple(children))


def pow_(child, n: int) -> Expr:
    return Expr("pow", (child,), n)


def exp(child) -> Expr:
    return Expr("exp", (child,))


def variables(n: int) -> list:
    return [var(i) for i in range(n)]


def max_var_index(e: Expr) -> int:
    """Largest variable index in ``e`` (-1 for constant trees)."""
    if e.op == "var":
        return e.value
    return max((max_var_index(a) for a in e.args), default=-1)


def has_op(e: Expr, ops) -> bool:
    if e.op in ops:
        return True
    return any(has_op(a, ops) for a in e.args)


def is_constant(e: Expr) -> bool:
    return max_var_index(e) < 0


def to_infix(e: Expr) -> str:
    op = e.op
    if op == "const":
        return str(e.value)
    if op == "var":
        return f"k{e.value + 1}"
    if op == "add":
        return "(" + " + ".join(to_infix(a) for a in e.args) + ")"
    if op == "mul":
        return "(" + "*".join(to_infix(a) for a in e.args) + ")"
    if op == "neg":
        return "-" + to_infix(e.args[0])
    if op == "div":
        return f"({to_infix(e.args[0])}/{to_infix(e.args[1])})"
    if op == "pow":
        return f"{to_infix(e.args[0])}^{e.value}"
    return f"{op}(" + ", ".join(to_infix(a) for a in e.args) + ")"


# ---------------------------------------------------------------------------
# evaluation

def _check_dim(e: Expr, k) -> None:
    if max_var_index(e) >= len(k):
        raise DimensionMismatch(
            f"expression uses k{max_var_index(e) + 1} but the point has dimension {len(k)}")


def evaluate(e: Expr, k):
    """Value of ``e`` at ``k``; exact for rational trees and points."""
    k = as_point(k)
    _check_dim(e, k)
    return _eval(e, k)


def _eval(e, k):
    op = e.op
    if op == "const":
        return e.value
    if op == "var":
        return k[e.value]
    if op == "add":
        total = Fraction(0)
        for a in e.args:
            total = total + _eval(a, k)
        return total
    if op == "mul":
        prod = Fraction(1)
        for a in e.args:
            prod = prod * _eval(a, k)
        return prod
    if op == "neg":
        return -_eval(e.args[0], k)
    if op == "div":
        num = _eval(e.args[0], k)
        den = _eval(e.args[1], k)
        if den == 0:
            raise DivisionByZero(f"denominator {to_infix(e.args[1])} vanishes at {_fmt(k)}")
        return num / den
    if op == "abs":
        return abs(_eval(e.args[0], k))
    if op == "max":
        return max(_eval(a, k) for a in e.args)
    if op == "min":
        return min(_eval(a, k) for a in e.args)
    if op == "pow":
        return _eval(e.args[0], k) ** e.value
    if op == "exp":
        u = float(_eval(e.args[0], k))
        try:
            return math.exp(u)
        except OverflowError:
            raise DomainError(f"exp overflow at {_fmt(k)}") from None
    raise AssertionError(op)


def _fmt(k) -> str:
    return "(" + ", ".join(str(c) for c in k) + ")"


def evaluate_batch(e: Expr, points) -> np.ndarray:
    """Float values of ``e`` at each row of ``points``.

    Rows where the expression is undefined (zero denominator, overflow)
    come back as NaN instead of raising.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("points must be a 2-D array")
    _check_dim(e, X[0] if len(X) else ())
    with np.errstate(all="ignore"):
        out = _eval_batch(e, X)
        out = np.broadcast_to(out, (X.shape[0],)).astype(float)
    return np.where(np.isfinite(out), out, np.nan)


def _eval_batch(e, X):
    op = e.op
    if op == "const":
        return np.full(X.shape[0], float(e.value))
    if op == "var":
        return X[:, e.value]
    vals = [_eval_batch(a, X) for a in e.args]
    if op == "add":
        return np.sum(vals, axis=0)
    if op == "mul":
        return np.prod(vals, axis=0)
    if op == "neg":
        return -vals[0]
    if op == "div":
        num, den = vals
        return np.where(den == 0, np.nan, num / np.where(den == 0, 1.0, den))
    if op == "abs":
        return np.abs(vals[0])
    if op == "max":
        return np.max(vals, axis=0)
    if op == "min":
        return np.min(vals, axis=0)
    if op == "pow":
        return vals[0] ** e.value
    if op == "exp":
        return np.exp(vals[0])
    raise AssertionError(op)


# ---------------------------------------------------------------------------
# directional derivatives

@dataclass(frozen=True)
class LimitConfig:
    """Shrinking-step scheme for one-sided difference quotients.

    Steps are ``h0 * 2**-j`` for ``j < steps``.  First-order bias is removed
    by Richardson extrapolation of consecutive quotients, and the limit is
    accepted once ``window`` consecutive extrapolants agree to ``rtol``.
    """

    h0: Fraction = Fraction(1, 16)
    steps: int = 24
    rtol: float = 1e-8
    window: int = 3


DEFAULT_LIMIT = LimitConfig()


@dataclass(frozen=True)
class DirectionalDerivative:
    value: object
    converged: bool


def _agree(vals, rtol) -> bool:
    ref = vals[-1]
    scale = max(1.0, *(abs(float(v)) for v in vals))
    return all(abs(float(v - ref)) <= rtol * scale for v in vals)


def directional_derivative(e: Expr, k, d, cfg: LimitConfig = DEFAULT_LIMIT,
                           base_value=None) -> DirectionalDerivative:
    """One-sided directional derivative of ``e`` at ``k`` along ``d``.

    ``base_value`` replaces ``e(k)`` for functions defined piecewise at the
    base point (their tree is only valid away from it).
    Raises DomainError when a probe point cannot be evaluated.
    """
    k = as_point(k)
    d = as_point(d)
    if len(k) != len(d):
        raise DimensionMismatch("point and direction differ in dimension")
    if all(c == 0 for c in d):
        return DirectionalDerivative(Fraction(0), True)
    f0 = evaluate(e, k) if base_value is None else as_scalar(base_value)
    h = Fraction(cfg.h0) if is_exact(f0) else float(cfg.h0)
    quotients, extrap = [], []
    for _ in range(cfg.steps):
        probe = tuple(ki + h * di for ki, di in zip(k, d))
        quotients.append((_eval(e, probe) - f0) / h)
        if len(quotients) >= 2:
            extrap.append(2 * quotients[-1] - quotients[-2])
            if len(extrap) >= cfg.window and _agree(extrap[-cfg.window:], cfg.rtol):
                return DirectionalDerivative(extrap[-1], True)
        h = h / 2
    return DirectionalDerivative(extrap[-1] if extrap else quotients[-1], False)


def directional_derivatives(e: Expr, k, D, cfg: LimitConfig = DEFAULT_LIMIT,
                            base_value=None):
    """Vectorized float version of ``directional_derivative``.

    Returns ``(values, converged)`` arrays, one entry per row of ``D``.
    Rows whose probes are undefined come back NaN and not converged.
    """
    k = np.asarray([float(c) for c in as_point(k)])
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if D.shape[1] != k.shape[0]:
        raise DimensionMismatch("direction rows do not match the point dimension")
    N = D.shape[0]
    f0 = float(evaluate(e, as_point(k)) if base_value is None else as_scalar(base_value))
    values = np.full(N, np.nan)
    converged = np.zeros(N, dtype=bool)
    zero = ~np.any(D != 0, axis=1)
    values[zero] = 0.0
    converged[zero] = True
    h = float(cfg.h0)
    history = []
    prev_q = None
    for _ in range(cfg.steps):
        q = (evaluate_batch(e, k + h * D) - f0) / h
        if prev_q is not None:
            history.append(2 * q - prev_q)
            if len(history) >= cfg.window:
                win = np.array(history[-cfg.window:])
                with np.errstate(invalid="ignore"):
                    scale = np.maximum(1.0, np.max(np.abs(win), axis=0))
                    spread = np.max(np.abs(win - win[-1]), axis=0)
                    ok = (spread <= cfg.rtol * scale) & ~converged
                values[ok] = win[-1][ok]
                converged |= ok
                if converged.all():
                    break
        prev_q = q
        h /= 2
    if history:
        rest = ~converged
        values[rest] = history[-1][rest]
    return values, converged


# ---------------------------------------------------------------------------
# smooth gradients

def gradient_if_smooth(e: Expr, k) -> Optional[tuple]:
    """Exact gradient of ``e`` at ``k``, or None if a nonsmooth node is active.

    An ``abs`` node is active when its argument vanishes; a ``max``/``min``
    node is active when its extremal child is not unique.
    """
    k = as_point(k)
    _check_dim(e, k)
    return _value_grad(e, k, len(k))[1]


def value_and_gradient(e: Expr, k):
    k = as_point(k)
    _check_dim(e, k)
    return _value_grad(e, k, len(k))


def _zeros(n):
    return tuple(Fraction(0) for _ in range(n))


def _axpy(a, x, y):
    return tuple(a * xi + yi for xi, yi in zip(x, y))


def _value_grad(e, k, n):
    op = e.op
    if op == "const":
        return e.value, _zeros(n)
    if op == "var":
        return k[e.value], tuple(Fraction(int(i == e.value)) for i in range(n))
    parts = [_value_grad(a, k, n) for a in e.args]
    vals = [p[0] for p in parts]
    grads = [p[1] for p in parts]
    if op == "add":
        v = sum(vals, Fraction(0))
        if any(g is None for g in grads):
            return v, None
        g = _zeros(n)
        for gi in grads:
            g = _axpy(1, gi, g)
        return v, g
    if op == "mul":
        v = Fraction(1)
        for x in vals:
            v = v * x
        if any(g is None for g in grads):
            return v, None
        g = _zeros(n)
        for i, gi in enumerate(grads):
            coef = Fraction(1)
            for j, x in enumerate(vals):
                if j != i:
                    coef = coef * x
            g = _axpy(coef, gi, g)
        return v, g
    if op == "neg":
        return -vals[0], None if grads[0] is None else tuple(-c for c in grads[0])
    if op == "div":
        u, w = vals
        if w == 0:
            raise DivisionByZero(f"denominator {to_infix(e.args[1])} vanishes at {_fmt(k)}")
        v = u / w
        gu, gw = grads
        if gu is None or gw is None:
            return v, None
        return v, tuple((a * w - u * b) / (w * w) for a, b in zip(gu, gw))
    if op == "abs":
        u = vals[0]
        if u == 0 or grads[0] is None:
            return abs(u), None
        s = 1 if u > 0 else -1
        return abs(u), tuple(s * c for c in grads[0])
    if op in ("max", "min"):
        best = max(vals) if op == "max" else min(vals)
        active = [i for i, x in enumerate(vals) if x == best]
        if len(active) != 1:
            return best, None
        return best, grads[active[0]]
    if op == "pow":
        u, p = vals[0], e.value
        v = u ** p
        if grads[0] is None:
            return v, None
        coef = p * u ** (p - 1)
        return v, tuple(coef * c for c in grads[0])
    if op == "exp":
        try:
            v = math.exp(float(vals[0]))
        except OverflowError:
            raise DomainError(f"exp overflow at {_fmt(k)}") from None
        if grads[0] is None:
            return v, None
        return v, tuple(v * c for c in grads[0])
    raise AssertionError(op)


# ---------------------------------------------------------------------------
# affine recognition (used by the exact tangent-cone path)

def affine_form(e: Expr, n: int):
    """``(coefficients, constant)`` if ``e`` is affine in k, else None."""
    op = e.op
    if op == "const":
        return _zeros(n), e.value
    if op == "var":
        if e.value >= n:
            raise DimensionMismatch(f"k{e.value + 1} outside dimension {n}")
        return tuple(Fraction(int(i == e.value)) for i in range(n)), Fraction(0)
    if op in ("add", "neg"):
        parts = [affine_form(a, n) for a in e.args]
        if any(p is None for p in parts):
            return None
        if op == "neg":
            a, b = parts[0]
            return tuple(-c for c in a), -b
        coef, c0 = _zeros(n), Fraction(0)
        for a, b in parts:
            coef, c0 = _axpy(1, a, coef), c0 + b
        return coef, c0
    if op == "mul":
        scale = Fraction(1)
        inner = None
        for a in e.args:
            if is_constant(a):
                s = _eval(a, ())
                if not is_exact(s):
                    return None
                scale *= s
            elif inner is None:
                inner = a
            else:
                return None
        if inner is None:
            return _zeros(n), scale
        p = affine_form(inner, n)
        if p is None:
            return None
        return tuple(scale * c for c in p[0]), scale * p[1]
    if op == "div":
        num, den = e.args
        if not is_constant(den):
            return None
        s = _eval(den, ())
        if not is_exact(s):
            return None
        p = affine_form(num, n)
        if p is None:
            return None
        return tuple(c / s for c in p[0]), p[1] / s
    if op == "pow" and e.value == 1:
        return affine_form(e.args[0], n)
    if is_constant(e):
        s = _eval(e, ())
        return (_zeros(n), s) if is_exact(s) else None
    return None


def dot(u: Sequence, v: Sequence):
    return sum((a * b for a, b in zip(u, v)), Fraction(0))
