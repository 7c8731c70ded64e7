"""MPEC instances, feasibility, index sets and linearization cones.

Functions are addressed by id: ``J`` for the objective and ``ell{i}``,
``h{i}``, ``G{i}``, ``H{i}`` (1-based) for constraints.  A leading ``-``
denotes the negated function, e.g. ``-G1``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import expr as ex
from .cones import GeneratedCone, HalfspaceCone, VertexPolytope, to_vector
from .errors import (AllPoolsEmpty, DimensionMismatch, DivisionByZero, FeasibilityError,
                     RuleFailure, ValidationError)
from .tangential import Subdifferential, build_subdifferential

ZERO_TOL = 1e-9
_FID = re.compile(r"^(-?)(J|ell|h|G|H)(\d*)$")


@dataclass(frozen=True)
class ManualEntry:
    """A hand-supplied tangential subdifferential (and optionally the
    function value) of one function at one point."""

    function: str
    point: tuple
    vertices: tuple
    value: object = None

    def __post_init__(self):
        object.__setattr__(self, "point", ex.as_point(self.point))
        object.__setattr__(self, "vertices", tuple(to_vector(v) for v in self.vertices))
        if self.value is not None:
            object.__setattr__(self, "value", ex.as_scalar(self.value))


@dataclass(frozen=True)
class MPECProblem:
    """min J(k) s.t. ell(k) <= 0, h(k) = 0, G(k) >= 0, H(k) >= 0, G(k).H(k) = 0."""

    n: int
    objective: ex.Expr
    ineq: tuple = ()
    eq: tuple = ()
    G: tuple = ()
    H: tuple = ()
    manual: tuple = ()
    name: str = ""

    def __post_init__(self):
        for attr in ("ineq", "eq", "G", "H", "manual"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if len(self.G) != len(self.H):
            raise ValidationError(f"|G| = {len(self.G)} but |H| = {len(self.H)}", "G/H")
        for fid, e in self.functions():
            if ex.max_var_index(e) >= self.n:
                raise ValidationError(
                    f"uses k{ex.max_var_index(e) + 1} in a problem of dimension {self.n}", fid)
        for entry in self.manual:
            if len(entry.point) != self.n:
                raise ValidationError("manual entry point has the wrong dimension", entry.function)
            if any(len(v) != self.n for v in entry.vertices):
                raise ValidationError("manual entry vertex has the wrong dimension", entry.function)
            self.function(entry.function)

    @property
    def m(self) -> int:
        return len(self.G)

    @property
    def p(self) -> int:
        return len(self.ineq)

    @property
    def q(self) -> int:
        return len(self.eq)

    def functions(self):
        yield "J", self.objective
        for name, group in (("ell", self.ineq), ("h", self.eq), ("G", self.G), ("H", self.H)):
            for i, e in enumerate(group, 1):
                yield f"{name}{i}", e

    def constraint_exprs(self):
        for fid, e in self.functions():
            if fid != "J":
                yield fid, e

    def function(self, fid: str) -> ex.Expr:
        m = _FID.match(fid)
        if not m:
            raise ValidationError(f"unknown function id {fid!r}")
        sign, name, idx = m.groups()
        if name == "J":
            if idx:
                raise ValidationError(f"unknown function id {fid!r}")
            e = self.objective
        else:
            group = {"ell": self.ineq, "h": self.eq, "G": self.G, "H": self.H}[name]
            if not idx or not 1 <= int(idx) <= len(group):
                raise ValidationError(f"function id {fid!r} out of range")
            e = group[int(idx) - 1]
        return ex.neg(e) if sign else e

    def manual_for(self, fid: str, k) -> Optional[ManualEntry]:
        k = ex.as_point(k)
        for entry in self.manual:
            if entry.function == fid and entry.point == k:
                return entry
        return None

    def value(self, fid: str, k):
        """Function value, falling back to a manual value where the tree is undefined."""
        try:
            return ex.evaluate(self.function(fid), k)
        except DivisionByZero:
            entry = self.manual_for(fid, k)
            if entry is None or entry.value is None:
                if fid.startswith("-"):
                    entry = self.manual_for(fid[1:], k)
                    if entry is not None and entry.value is not None:
                        return -entry.value
                raise
            return entry.value


# ---------------------------------------------------------------------------
# feasibility and index sets

def _zero(x, tol) -> bool:
    return x == 0 if isinstance(x, Fraction) else abs(x) <= tol


def _pos(x, tol) -> bool:
    return x > 0 if isinstance(x, Fraction) else x > tol


def _neg(x, tol) -> bool:
    return x < 0 if isinstance(x, Fraction) else x < -tol


@dataclass(frozen=True)
class Violation:
    constraint: str
    residual: object
    rule: str


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    violations: tuple

    def __bool__(self):
        return self.feasible


def check_feasible(p: MPECProblem, k, tol: float = ZERO_TOL) -> FeasibilityResult:
    """Check all five constraint groups; exact on rational data."""
    k = ex.as_point(k)
    if len(k) != p.n:
        raise DimensionMismatch(f"point of dimension {len(k)} for a problem of dimension {p.n}")
    out = []
    for i in range(1, p.p + 1):
        v = p.value(f"ell{i}", k)
        if _pos(v, tol):
            out.append(Violation(f"ell{i}", v, "<= 0"))
    for j in range(1, p.q + 1):
        v = p.value(f"h{j}", k)
        if not _zero(v, tol):
            out.append(Violation(f"h{j}", v, "= 0"))
    total = Fraction(0)
    for i in range(1, p.m + 1):
        g, h = p.value(f"G{i}", k), p.value(f"H{i}", k)
        if _neg(g, tol):
            out.append(Violation(f"G{i}", g, ">= 0"))
        if _neg(h, tol):
            out.append(Violation(f"H{i}", h, ">= 0"))
        total = total + g * h
    if p.m and not _zero(total, tol):
        out.append(Violation("GtH", total, "= 0"))
    return FeasibilityResult(not out, tuple(out))


@dataclass(frozen=True)
class IndexSets:
    """Active inequalities and the complementarity partition (1-based)."""

    I_ell: tuple
    theta: tuple
    omega: tuple
    upsilon: tuple

    def classify(self, i: int) -> str:
        if i in self.theta:
            return "theta"
        if i in self.omega:
            return "omega"
        return "upsilon"


def compute_index_sets(p: MPECProblem, k, tol: float = ZERO_TOL) -> IndexSets:
    feas = check_feasible(p, k, tol)
    if not feas:
        raise FeasibilityError(feas.violations)
    k = ex.as_point(k)
    active = tuple(i for i in range(1, p.p + 1) if _zero(p.value(f"ell{i}", k), tol))
    theta, omega, upsilon = [], [], []
    for i in range(1, p.m + 1):
        g0 = _zero(p.value(f"G{i}", k), tol)
        h0 = _zero(p.value(f"H{i}", k), tol)
        if g0 and h0:
            omega.append(i)
        elif g0:
            theta.append(i)
        else:
            upsilon.append(i)
    return IndexSets(active, tuple(theta), tuple(omega), tuple(upsilon))


# ---------------------------------------------------------------------------
# subdifferentials of problem functions

class SubdifferentialProvider:
    """Caches the tangential subdifferential of each function at one point."""

    def __init__(self, problem: MPECProblem, point):
        self.problem = problem
        self.point = ex.as_point(point)
        self._cache = {}

    def get(self, fid: str) -> Subdifferential:
        if fid not in self._cache:
            self._cache[fid] = self._build(fid)
        return self._cache[fid]

    def _build(self, fid):
        e = self.problem.function(fid)
        entry = self.problem.manual_for(fid, self.point)
        base = None
        try:
            ex.evaluate(e, self.point)
        except DivisionByZero:
            try:
                base = self.problem.value(fid, self.point)
            except DivisionByZero:
                raise RuleFailure("formula undefined at the point and no manual value", fid) from None
        try:
            return build_subdifferential(
                e, self.point,
                manual_override=None if entry is None else entry.vertices,
                base_value=base)
        except RuleFailure as exc:
            raise exc.with_function(fid) from None


# ---------------------------------------------------------------------------
# generator families and cones

PI_POOLS = ("ell", "hbar", "G_Theta", "H_Upsilon", "GH_Omega")
ALL_POOLS = ("ell", "hbar", "G_Theta", "G_Omega", "H_Upsilon", "H_Omega", "GH_Omega")


@dataclass(frozen=True)
class GeneratorFamilies:
    dim: int
    pools: dict
    subdiffs: dict = field(default_factory=dict)  # fid -> VertexPolytope
    index_sets: Optional[IndexSets] = None

    def pool(self, name):
        return self.pools[name]

    def normals(self, names) -> tuple:
        seen, out = set(), []
        for name in names:
            for v in self.pools[name]:
                if v not in seen:
                    seen.add(v)
                    out.append(v)
        return tuple(out)


def pool_members(idx: IndexSets, p: MPECProblem) -> dict:
    """Function ids contributing to each pool."""
    return {
        "ell": [f"ell{i}" for i in idx.I_ell],
        "hbar": [f for j in range(1, p.q + 1) for f in (f"h{j}", f"-h{j}")],
        "G_Theta": [f for i in idx.theta for f in (f"G{i}", f"-G{i}")],
        "G_Omega": [f"G{i}" for i in idx.omega],
        "H_Upsilon": [f for i in idx.upsilon for f in (f"H{i}", f"-H{i}")],
        "H_Omega": [f"H{i}" for i in idx.omega],
        "GH_Omega": [f for i in idx.omega for f in (f"-G{i}", f"-H{i}")],
    }


def assemble_families(p: MPECProblem, k, provider: Optional[SubdifferentialProvider] = None,
                      index_sets: Optional[IndexSets] = None) -> GeneratorFamilies:
    k = ex.as_point(k)
    idx = index_sets or compute_index_sets(p, k)
    provider = provider or SubdifferentialProvider(p, k)
    pools, subdiffs = {}, {}
    for name, fids in pool_members(idx, p).items():
        seen, verts = set(), []
        for fid in fids:
            poly = provider.get(fid).polytope
            subdiffs[fid] = poly
            for v in poly.vertices:
                if v not in seen:
                    seen.add(v)
                    verts.append(v)
        pools[name] = tuple(verts)
    return GeneratorFamilies(p.n, pools, subdiffs, idx)


def build_pi(fams: GeneratorFamilies) -> HalfspaceCone:
    if not any(fams.pools[name] for name in PI_POOLS):
        raise AllPoolsEmpty("every pool defining Pi is empty")
    return HalfspaceCone(fams.normals(PI_POOLS), fams.dim)


@dataclass(frozen=True)
class PsiCone:
    """Union of two convex branches (never convexified)."""

    branch_G: HalfspaceCone
    branch_H: HalfspaceCone

    @property
    def branches(self):
        return (self.branch_G, self.branch_H)

    def contains(self, d) -> bool:
        return self.branch_G.contains(d) or self.branch_H.contains(d)


def build_psi(fams: GeneratorFamilies) -> PsiCone:
    if not any(fams.pools[name] for name in ALL_POOLS):
        raise AllPoolsEmpty("every pool defining Psi is empty")
    base = fams.normals(PI_POOLS)
    return PsiCone(HalfspaceCone(base + fams.pools["G_Omega"], fams.dim),
                   HalfspaceCone(base + fams.pools["H_Omega"], fams.dim))


def build_delta(fams: GeneratorFamilies) -> GeneratedCone:
    return GeneratedCone(fams.normals(PI_POOLS), fams.dim)


def build_lambda(fams: GeneratorFamilies) -> GeneratedCone:
    return GeneratedCone(fams.normals(PI_POOLS + ("G_Omega",)), fams.dim)
