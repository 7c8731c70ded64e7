"""Exact rational polyhedral geometry.

Vertex polytopes, finitely generated cones, halfspace cones, a phase-1
simplex for feasibility with certificates, and double-description ray
enumeration.  Everything here runs on ``fractions.Fraction``; there are no
tolerances anywhere in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .errors import DimensionMismatch, DimensionTooLarge

MAX_RAY_DIM = 8


def to_vector(coords) -> tuple:
    """Canonical rational vector; floats are converted exactly."""
    out = []
    for c in coords:
        if isinstance(c, Fraction):
            out.append(c)
        elif isinstance(c, str):
            out.append(Fraction(c.strip()))
        elif isinstance(c, bool):
            raise TypeError("booleans are not coordinates")
        else:
            out.append(Fraction(c))
    return tuple(out)


def dot(u, v):
    if len(u) != len(v):
        raise DimensionMismatch(f"dimension {len(u)} vs {len(v)}")
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def vadd(u, v):
    return tuple(a + b for a, b in zip(u, v))


def vscale(c, u):
    return tuple(c * a for a in u)


def is_zero(u) -> bool:
    return all(a == 0 for a in u)


def primitive(u) -> tuple:
    """Positive multiple of ``u`` with coprime integer coordinates."""
    if is_zero(u):
        return tuple(Fraction(0) for _ in u)
    lcm = 1
    for a in u:
        lcm = lcm * a.denominator // math.gcd(lcm, a.denominator)
    ints = [int(a * lcm) for a in u]
    g = 0
    for a in ints:
        g = math.gcd(g, abs(a))
    return tuple(Fraction(a // g) for a in ints)


def _dedupe(vectors):
    seen, out = set(), []
    for v in vectors:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return tuple(out)


def _common_dim(vectors, dim=None):
    for v in vectors:
        if dim is None:
            dim = len(v)
        elif len(v) != dim:
            raise DimensionMismatch(f"vectors of dimension {dim} and {len(v)} mixed")
    return dim


def fmt_vector(v) -> str:
    return "(" + ", ".join(str(c) for c in v) + ")"


# ---------------------------------------------------------------------------
# convex bodies

@dataclass(frozen=True)
class VertexPolytope:
    """conv(vertices); the vertex list may carry redundant points."""

    vertices: tuple

    def __post_init__(self):
        verts = _dedupe(to_vector(v) for v in self.vertices)
        if not verts:
            raise ValueError("a vertex polytope needs at least one point")
        _common_dim(verts)
        object.__setattr__(self, "vertices", verts)

    @property
    def dim(self) -> int:
        return len(self.vertices[0])

    @property
    def is_singleton(self) -> bool:
        return len(self.vertices) == 1

    def support(self, d):
        return max(dot(v, d) for v in self.vertices)

    def support_float(self, d) -> float:
        return max(sum(float(a) * float(b) for a, b in zip(v, d)) for v in self.vertices)

    def contains(self, x) -> bool:
        return convex_weights(self.vertices, x) is not None

    def scaled(self, c) -> "VertexPolytope":
        c = Fraction(c)
        return VertexPolytope(tuple(vscale(c, v) for v in self.vertices))

    def negated(self) -> "VertexPolytope":
        return self.scaled(-1)

    def reduced(self) -> "VertexPolytope":
        return VertexPolytope(prune_to_vertices(self.vertices))

    @classmethod
    def singleton(cls, v):
        return cls((to_vector(v),))


@dataclass(frozen=True)
class GeneratedCone:
    """{sum beta_g g : beta >= 0}; the origin is always a member."""

    generators: tuple
    dim: int

    def __post_init__(self):
        gens = _dedupe(to_vector(g) for g in self.generators)
        _common_dim(gens, self.dim)
        object.__setattr__(self, "generators", gens)

    def contains(self, x) -> bool:
        return cone_member(self, x)[0]


@dataclass(frozen=True)
class HalfspaceCone:
    """{d : <g, d> <= 0 for every normal g}; no normals means all of R^n."""

    normals: tuple
    dim: int

    def __post_init__(self):
        normals = _dedupe(to_vector(g) for g in self.normals)
        _common_dim(normals, self.dim)
        object.__setattr__(self, "normals", normals)

    def contains(self, d) -> bool:
        d = to_vector(d)
        if len(d) != self.dim:
            raise DimensionMismatch(f"dimension {len(d)} vs {self.dim}")
        return all(dot(g, d) <= 0 for g in self.normals)

    def violated_by(self, d):
        d = to_vector(d)
        return [g for g in self.normals if dot(g, d) > 0]

    def intersect(self, other: "HalfspaceCone") -> "HalfspaceCone":
        if other.dim != self.dim:
            raise DimensionMismatch(f"dimension {self.dim} vs {other.dim}")
        return HalfspaceCone(self.normals + other.normals, self.dim)


@dataclass(frozen=True)
class LPCertificate:
    feasible: bool
    x: Optional[tuple] = None

    def __bool__(self):
        return self.feasible


# ---------------------------------------------------------------------------
# phase-1 simplex

def lp_feasible(eq_matrix, rhs, nonneg_mask=None, convex_groups=(), n_vars=None) -> LPCertificate:
    """Decide ``A x = b`` with sign and convexity side conditions, exactly.

    ``nonneg_mask[j]`` marks x_j >= 0 (default: all variables).  Each entry
    of ``convex_groups`` is a list of variable indices whose values must be
    nonnegative and sum to one.  Phase-1 simplex with Bland's rule; on
    success the returned x satisfies every equality exactly.
    """
    A = [to_vector(row) for row in eq_matrix]
    b = list(to_vector(rhs))
    if len(A) != len(b):
        raise DimensionMismatch(f"{len(A)} rows but {len(b)} right-hand sides")
    n = n_vars
    if n is None:
        if A:
            n = len(A[0])
        elif nonneg_mask is not None:
            n = len(nonneg_mask)
        else:
            n = 1 + max((j for g in convex_groups for j in g), default=-1)
    for row in A:
        if len(row) != n:
            raise DimensionMismatch(f"row of length {len(row)} in a system with {n} variables")
    mask = [True] * n if nonneg_mask is None else [bool(f) for f in nonneg_mask]
    if len(mask) != n:
        raise DimensionMismatch(f"nonneg mask of length {len(mask)} for {n} variables")
    for group in convex_groups:
        row = [Fraction(0)] * n
        for j in group:
            if not 0 <= j < n:
                raise DimensionMismatch(f"convex group index {j} out of range")
            row[j] = Fraction(1)
            mask[j] = True
        A.append(tuple(row))
        b.append(Fraction(1))

    # split free variables into differences of nonnegative ones
    columns = []  # (original index, sign)
    for j in range(n):
        columns.append((j, 1))
        if not mask[j]:
            columns.append((j, -1))
    x_std = _phase_one([[s * row[j] for j, s in columns] for row in A], b, len(columns))
    if x_std is None:
        return LPCertificate(False)
    x = [Fraction(0)] * n
    for (j, s), val in zip(columns, x_std):
        x[j] += s * val
    x = tuple(x)
    for row, rhs_i in zip(A, b):
        assert dot(row, x) == rhs_i, "simplex certificate does not reproduce the system"
    return LPCertificate(True, x)


def _phase_one(A, b, N):
    """Feasible x >= 0 with A x = b, or None.  Bland's rule throughout."""
    m = len(A)
    if m == 0:
        return [Fraction(0)] * N
    T = []
    for i in range(m):
        row = list(A[i]) + [Fraction(0)] * m + [b[i]]
        if b[i] < 0:
            row = [-c for c in row]
        row[N + i] = Fraction(1)
        T.append(row)
    basis = [N + i for i in range(m)]
    width = N + m
    # reduced costs of the phase-1 objective (sum of artificials)
    z = [Fraction(0)] * (width + 1)
    for j in list(range(N)) + [width]:
        z[j] = -sum((T[i][j] for i in range(m)), Fraction(0))

    while True:
        enter = next((j for j in range(width) if z[j] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][width] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    leave, best = i, ratio
        if leave is None:  # unbounded cannot happen for phase 1
            raise AssertionError("phase-1 objective unbounded")
        _pivot(T, z, leave, enter)
        basis[leave] = enter

    if z[width] != 0:
        return None
    x = [Fraction(0)] * N
    for i, j in enumerate(basis):
        if j < N:
            x[j] = T[i][width]
    return x


def _pivot(T, z, r, c):
    piv = T[r][c]
    row = [v / piv for v in T[r]]
    T[r] = row
    for i, other in enumerate(T):
        if i != r and other[c] != 0:
            f = other[c]
            T[i] = [a - f * p for a, p in zip(other, row)]
    if z[c] != 0:
        f = z[c]
        z[:] = [a - f * p for a, p in zip(z, row)]


def find_point(n, le=(), eq=()) -> Optional[tuple]:
    """Some d in Q^n with ``a.d <= b`` for (a, b) in ``le`` and ``a.d = b`` in ``eq``."""
    le, eq = list(le), list(eq)
    n_slack = len(le)
    rows, rhs = [], []
    for s, (a, bi) in enumerate(le):
        a = to_vector(a)
        slack = [Fraction(0)] * n_slack
        slack[s] = Fraction(1)
        rows.append(a + tuple(slack))
        rhs.append(Fraction(bi))
    for a, bi in eq:
        rows.append(to_vector(a) + (Fraction(0),) * n_slack)
        rhs.append(Fraction(bi))
    mask = [False] * n + [True] * n_slack
    cert = lp_feasible(rows, rhs, mask, n_vars=n + n_slack)
    return cert.x[:n] if cert.feasible else None


# ---------------------------------------------------------------------------
# polars, membership, sums

def polar(generators, dim=None) -> HalfspaceCone:
    """Negative polar {u : <u, g> <= 0 for all g} of a generator set."""
    gens = [to_vector(g) for g in generators]
    dim = _common_dim(gens, dim)
    if dim is None:
        raise DimensionMismatch("dimension of an empty generator set must be given")
    return HalfspaceCone(tuple(gens), dim)


def strict_polar_member(generators, u) -> bool:
    """True iff <u, g> < 0 for every generator (vacuously true if none)."""
    u = to_vector(u)
    return all(dot(to_vector(g), u) < 0 for g in generators)


def cone_member(cone: GeneratedCone, x):
    """``(True, weights)`` if x is a nonnegative combination of the generators."""
    x = to_vector(x)
    if len(x) != cone.dim:
        raise DimensionMismatch(f"dimension {len(x)} vs {cone.dim}")
    gens = cone.generators
    if not gens:
        return (True, ()) if is_zero(x) else (False, None)
    A = [tuple(g[i] for g in gens) for i in range(cone.dim)]
    cert = lp_feasible(A, x, n_vars=len(gens))
    return (True, cert.x) if cert.feasible else (False, None)


def convex_weights(points, x) -> Optional[tuple]:
    """Convex weights expressing x over ``points``, or None."""
    points = [to_vector(p) for p in points]
    x = to_vector(x)
    dim = _common_dim(points, len(x))
    A = [tuple(p[i] for p in points) for i in range(dim)]
    cert = lp_feasible(A, x, convex_groups=[list(range(len(points)))], n_vars=len(points))
    return cert.x if cert.feasible else None


def prune_to_vertices(points) -> tuple:
    """Drop every point that is a convex combination of the others."""
    pts = list(_dedupe(to_vector(p) for p in points))
    i = 0
    while i < len(pts) and len(pts) > 1:
        others = pts[:i] + pts[i + 1:]
        if convex_weights(others, pts[i]) is not None:
            pts = others
        else:
            i += 1
    return tuple(pts)


def minkowski_sum(p: VertexPolytope, q: VertexPolytope, reduce=None) -> VertexPolytope:
    """Generators of p + q.  Redundant points are pruned only at dim <= 3
    unless ``reduce`` says otherwise."""
    if p.dim != q.dim:
        raise DimensionMismatch(f"dimension {p.dim} vs {q.dim}")
    sums = [vadd(v, w) for v in p.vertices for w in q.vertices]
    if reduce is None:
        reduce = p.dim <= 3
    return VertexPolytope(prune_to_vertices(sums) if reduce else tuple(sums))


def cone_subset(a: GeneratedCone, b: HalfspaceCone):
    """``(True, None)`` if cone(a) lies in b, else ``(False, violating generator)``."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension {a.dim} vs {b.dim}")
    for g in a.generators:
        if not b.contains(g):
            return False, g
    return True, None


# ---------------------------------------------------------------------------
# extreme rays by double description

def extreme_rays(h: HalfspaceCone, max_dim: int = MAX_RAY_DIM) -> tuple:
    """Generators of the halfspace cone ``h``.

    Extreme rays of the pointed part plus the lineality space as +/- pairs,
    each scaled to a primitive integer vector.
    """
    n = h.dim
    if n > max_dim:
        raise DimensionTooLarge(f"ray enumeration limited to dimension {max_dim}, got {n}")
    lineality = [tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)]
    rays = []  # (vector, frozenset of tight constraint indices)
    processed = set()
    for idx, a in enumerate(h.normals):
        if is_zero(a):
            processed.add(idx)
            continue
        pivot = next((l for l in lineality if dot(a, l) != 0), None)
        if pivot is not None:
            ap = dot(a, pivot)
            lineality = [vadd(l, vscale(-dot(a, l) / ap, pivot)) for l in lineality if l is not pivot]
            rays = [(vadd(r, vscale(-dot(a, r) / ap, pivot)), z | {idx}) for r, z in rays]
            rays.append((pivot if ap < 0 else vscale(-1, pivot), frozenset(processed)))
        else:
            signs = [dot(a, r) for r, _ in rays]
            pos = [rz for rz, s in zip(rays, signs) if s > 0]
            negs = [rz for rz, s in zip(rays, signs) if s < 0]
            new = [(r, z | {idx}) for (r, z), s in zip(rays, signs) if s == 0] + negs
            for p, zp in pos:
                for q, zq in negs:
                    common = zp & zq
                    if any(common <= zr for r, zr in rays if r is not p and r is not q):
                        continue
                    ray = vadd(vscale(dot(a, p), q), vscale(-dot(a, q), p))
                    new.append((ray, common | {idx}))
            rays = new
        processed.add(idx)
    out = []
    for l in lineality:
        l = primitive(l)
        out.extend([l, vscale(-1, l)])
    out.extend(primitive(r) for r, _ in rays)
    return _dedupe(out)
