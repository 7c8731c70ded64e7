"""Tangential subdifferentials built from expression structure.

A tangentially convex function has a sublinear directional derivative
d -> f'(k, d); its tangential subdifferential is the compact convex set
whose support function is that derivative.  ``build_subdifferential``
derives the set as a vertex polytope from a small calculus (smooth
gradients, abs/max kinks, sums, products and monotone chain rules), and
the numeric checks below compare support values against difference
quotients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import expr as ex
from .cones import VertexPolytope, minkowski_sum, prune_to_vertices, to_vector
from .errors import DomainError, RuleFailure

log = logging.getLogger(__name__)

SUPPORT_TOL = 1e-6
FLOAT_DENOMINATOR = 10**12


def to_rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(float(x)).limit_denominator(FLOAT_DENOMINATOR)


@dataclass(frozen=True)
class Subdifferential:
    point: tuple
    polytope: VertexPolytope
    provenance: str  # "rule-derived" or "manual"
    base_value: object = None
    warnings: tuple = ()

    @property
    def vertices(self):
        return self.polytope.vertices


# ---------------------------------------------------------------------------
# construction

def build_subdifferential(e: ex.Expr, k, manual_override=None, base_value=None,
                          check_manual=True) -> Subdifferential:
    """Tangential subdifferential of ``e`` at ``k``.

    A manual override always wins; it is still compared against numeric
    directional derivatives and a warning is attached on mismatch.
    """
    k = ex.as_point(k)
    if manual_override is not None:
        poly = manual_override if isinstance(manual_override, VertexPolytope) \
            else VertexPolytope(manual_override)
        s = Subdifferential(k, poly, "manual", base_value)
        if not check_manual:
            return s
        warnings = []
        try:
            rep = support_consistency(s, e)
        except DomainError as exc:
            warnings.append(f"support check skipped: {exc}")
        else:
            if rep.max_deviation > SUPPORT_TOL:
                warnings.append(
                    f"manual set disagrees with directional derivatives by "
                    f"{rep.max_deviation:.3g} along {tuple(round(c, 6) for c in rep.worst_direction)}")
        for w in warnings:
            log.warning(w)
        return Subdifferential(k, poly, "manual", base_value, tuple(warnings))
    poly = _rule(e, k)
    return Subdifferential(k, poly, "rule-derived", base_value)


def _singleton(g):
    return VertexPolytope.singleton(tuple(to_rational(c) for c in g))


def _zero(n):
    return VertexPolytope.singleton((Fraction(0),) * n)


def _scale(poly, c, what):
    """c * poly, allowed for c >= 0 or when poly is a single point."""
    c = to_rational(c)
    if c >= 0 or poly.is_singleton:
        return poly.scaled(c)
    raise RuleFailure(f"negative multiple of the nonsmooth term {what} is not tangentially convex")


def _sum(polys):
    out = polys[0]
    for p in polys[1:]:
        out = minkowski_sum(out, p)
    return out


def _rule(e, k):
    n = len(k)
    g = ex.gradient_if_smooth(e, k)
    if g is not None:
        return _singleton(g)
    op = e.op
    if op == "add":
        return _sum([_rule(a, k) for a in e.args])
    if op == "neg":
        return _scale(_rule(e.args[0], k), -1, ex.to_infix(e.args[0]))
    if op == "mul":
        vals = [ex.evaluate(a, k) for a in e.args]
        parts = []
        for i, a in enumerate(e.args):
            coef = Fraction(1)
            for j, v in enumerate(vals):
                if j != i:
                    coef = coef * v
            if coef == 0:
                continue
            parts.append(_scale(_rule(a, k), coef, ex.to_infix(a)))
        return _sum(parts) if parts else _zero(n)
    if op == "div":
        num, den = e.args
        w = ex.evaluate(den, k)
        if w == 0:
            raise RuleFailure(f"denominator {ex.to_infix(den)} vanishes at the base point")
        u = ex.evaluate(num, k)
        parts = [_scale(_rule(num, k), 1 / to_rational(w), ex.to_infix(num))]
        if u != 0:
            parts.append(_scale(_rule(den, k), -to_rational(u) / to_rational(w) ** 2, ex.to_infix(den)))
        return _sum(parts)
    if op == "abs":
        child = e.args[0]
        u = ex.evaluate(child, k)
        if u > 0:
            return _rule(child, k)
        if u < 0:
            return _scale(_rule(child, k), -1, ex.to_infix(child))
        gu = ex.gradient_if_smooth(child, k)
        if gu is None:
            raise RuleFailure(f"abs of a nonsmooth argument at its zero ({ex.to_infix(e)})")
        gu = tuple(to_rational(c) for c in gu)
        return VertexPolytope(prune_to_vertices([gu, tuple(-c for c in gu)]))
    if op in ("max", "min"):
        vals = [ex.evaluate(a, k) for a in e.args]
        best = max(vals) if op == "max" else min(vals)
        active = [a for a, v in zip(e.args, vals) if v == best]
        if len(active) == 1:
            return _rule(active[0], k)
        grads = [ex.gradient_if_smooth(a, k) for a in active]
        if any(gr is None for gr in grads):
            raise RuleFailure(f"{op} with several active nonsmooth pieces ({ex.to_infix(e)})")
        points = [tuple(to_rational(c) for c in gr) for gr in grads]
        if op == "min" and len(set(points)) > 1:
            raise RuleFailure(f"min of distinct active pieces is not tangentially convex ({ex.to_infix(e)})")
        return VertexPolytope(prune_to_vertices(points))
    if op == "pow":
        child = e.args[0]
        u = ex.evaluate(child, k)
        coef = e.value * u ** (e.value - 1)
        if coef == 0:
            return _zero(n)
        return _scale(_rule(child, k), coef, ex.to_infix(child))
    if op == "exp":
        child = e.args[0]
        coef = math.exp(float(ex.evaluate(child, k)))
        return _scale(_rule(child, k), coef, ex.to_infix(child))
    raise RuleFailure(f"no rule for {op} node ({ex.to_infix(e)})")


# ---------------------------------------------------------------------------
# numeric checks

@dataclass(frozen=True)
class DirectionSample:
    """Directions for support checks: planar angles in 2-D, seeded unit
    vectors otherwise."""

    planar: int = 360
    random: int = 1000
    seed: int = 0
    exclude_axes: bool = False


def sample_directions(n: int, cfg: DirectionSample = DirectionSample()) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        out = []
        for j in range(cfg.planar):
            if cfg.exclude_axes and (4 * j) % cfg.planar == 0:
                continue
            t = 2 * math.pi * j / cfg.planar
            out.append((math.cos(t), math.sin(t)))
        D = np.array(out)
        if cfg.exclude_axes:
            # angles at multiples of 90 degrees are dropped; kill residual roundoff
            D[np.abs(D) < 1e-15] = 0.0
        return D
    rng = np.random.default_rng(cfg.seed)
    D = rng.standard_normal((cfg.random, n))
    return D / np.linalg.norm(D, axis=1, keepdims=True)


@dataclass(frozen=True)
class SupportReport:
    max_deviation: float
    worst_direction: tuple
    checked: int
    divergent: int


def support_consistency(s: Subdifferential, e: ex.Expr, dirs: DirectionSample = DirectionSample()) -> SupportReport:
    """Compare max_v <v, d> with the numeric directional derivative."""
    D = sample_directions(len(s.point), dirs)
    values, ok = ex.directional_derivatives(e, s.point, D, base_value=s.base_value)
    V = np.array([[float(c) for c in v] for v in s.vertices])
    support = np.max(D @ V.T, axis=1)
    dev = np.abs(support - values)
    dev[~ok] = -1.0
    divergent = int(np.count_nonzero(~ok))
    if not ok.any():
        return SupportReport(math.inf, (), 0, divergent)
    worst = int(np.argmax(dev))
    return SupportReport(float(dev[worst]), tuple(float(c) for c in D[worst]),
                         int(np.count_nonzero(ok)), divergent)


@dataclass(frozen=True)
class ProbeConfig:
    samples: int = 10_000
    seed: int = 0
    tol: float = 1e-6


@dataclass(frozen=True)
class ConvexityProbe:
    status: str  # "no-violation" or "refuted"
    samples: int
    excluded: int = 0
    witness: Optional[dict] = None

    @property
    def refuted(self) -> bool:
        return self.status == "refuted"


def _axis_pairs(n):
    axes = []
    for i in range(n):
        for s in (1, -1):
            axes.append(tuple(Fraction(s if j == i else 0) for j in range(n)))
    pairs = []
    for a in range(len(axes)):
        for b in range(a + 1, len(axes)):
            pairs.append((axes[a], axes[b]))
    return pairs


def tangential_convexity_probe(e: ex.Expr, k, cfg: ProbeConfig = ProbeConfig(),
                               base_value=None) -> ConvexityProbe:
    """Sample midpoint-convexity of d -> f'(k, d).

    Signed coordinate-axis pairs at lambda = 1/2 run first, then seeded
    random pairs.  Pairs whose derivatives do not converge are excluded.
    """
    k = ex.as_point(k)
    n = len(k)
    pairs = _axis_pairs(n)
    rng = np.random.default_rng(cfg.seed)
    D1 = rng.standard_normal((cfg.samples, n))
    D2 = rng.standard_normal((cfg.samples, n))
    lam = rng.uniform(0.0, 1.0, cfg.samples)
    A1 = np.vstack([np.array([[float(c) for c in p[0]] for p in pairs]), D1])
    A2 = np.vstack([np.array([[float(c) for c in p[1]] for p in pairs]), D2])
    L = np.concatenate([np.full(len(pairs), 0.5), lam])
    M = L[:, None] * A1 + (1 - L)[:, None] * A2
    f1, ok1 = ex.directional_derivatives(e, k, A1, base_value=base_value)
    f2, ok2 = ex.directional_derivatives(e, k, A2, base_value=base_value)
    fm, okm = ex.directional_derivatives(e, k, M, base_value=base_value)
    ok = ok1 & ok2 & okm
    rhs = L * f1 + (1 - L) * f2
    bad = ok & (fm > rhs + cfg.tol * np.maximum(1.0, np.abs(rhs)))
    total = len(L)
    excluded = int(np.count_nonzero(~ok))
    if bad.any():
        i = int(np.argmax(bad))
        if i < len(pairs):
            d1, d2, lm = pairs[i][0], pairs[i][1], Fraction(1, 2)
        else:
            d1, d2, lm = tuple(A1[i]), tuple(A2[i]), float(L[i])
        witness = {"d1": d1, "d2": d2, "lambda": lm,
                   "mixed": float(fm[i]), "bound": float(rhs[i])}
        return ConvexityProbe("refuted", total - excluded, excluded, witness)
    return ConvexityProbe("no-violation", total - excluded, excluded)
