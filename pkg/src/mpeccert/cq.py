"""Constraint qualifications at a feasible point.

GS-ACQ and MPEC-ACQ ask whether the linearization cones Pi and Psi lie in
the contingent cone T(K, k*); the Zangwill variant asks the same of the
closure of the feasible-direction cone.  When every constraint is a
combination of affine and abs-of-affine terms, K is a finite union of
polyhedra near k* and the inclusions are decided exactly.  Otherwise test
rays are pushed through a numeric tangent probe and the verdict says so.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import expr as ex
from .cones import (GeneratedCone, HalfspaceCone, cone_member, extreme_rays, find_point,
                    fmt_vector, primitive, to_vector)
from .convexity import (DEFAULT_SAMPLES, SampleConfig, check_pseudoaffine,
                        check_pseudoconcave)
from .errors import AllPoolsEmpty, DimensionTooLarge, DomainError, RuleFailure
from .model import (IndexSets, MPECProblem, SubdifferentialProvider, assemble_families,
                    build_pi, build_psi, compute_index_sets)

MAX_PIECES = 4096


@dataclass(frozen=True)
class CQVerdict:
    name: str
    status: str  # holds-exact, holds-on-samples, refuted, undefined, inconclusive
    rays: int = 0
    probe_depth: int = 0
    witness: Optional[tuple] = None
    trace: tuple = ()
    reason: str = ""

    @property
    def holds(self) -> bool:
        return self.status in ("holds-exact", "holds-on-samples")

    @property
    def refuted(self) -> bool:
        return self.status == "refuted"

    def to_dict(self) -> dict:
        out = {"name": self.name, "status": self.status, "rays": self.rays}
        if self.probe_depth:
            out["probe_depth"] = self.probe_depth
        if self.witness is not None:
            out["witness"] = [str(c) for c in self.witness]
        if self.trace:
            out["trace"] = list(self.trace)
        if self.reason:
            out["reason"] = self.reason
        return out


@dataclass(frozen=True)
class TangentProbeConfig:
    """Steps t_z = 2^-1 .. 2^-depth; at step t the search radius is
    min(radius_factor * t, 1/2) * t."""

    depth: int = 20
    radius_factor: float = 10.0
    feas_tol: float = 1e-3  # times t^2, never below tol_floor
    tol_floor: float = 1e-14
    burn_in: int = 4
    fail_run: int = 12
    random_rays: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.depth < self.burn_in + 1 or self.fail_run > self.depth:
            raise ValueError("probe depth too small for the burn-in and failure run")

    def steps(self):
        return [2.0 ** -z for z in range(1, self.depth + 1)]

    def tolerance(self, t: float) -> float:
        return max(self.feas_tol * t * t, self.tol_floor)

    def radius(self, t: float) -> float:
        eps = min(self.radius_factor * t, 0.5)
        return eps * t


DEFAULT_PROBE = TangentProbeConfig()


# ---------------------------------------------------------------------------
# numeric feasibility

class _Residuals:
    """Vectorized constraint residuals; 0 means feasible."""

    def __init__(self, p: MPECProblem):
        self.p = p

    def components(self, X):
        p = self.p
        cols = []
        for e in p.ineq:
            cols.append(np.maximum(ex.evaluate_batch(e, X), 0.0))
        for e in p.eq:
            cols.append(np.abs(ex.evaluate_batch(e, X)))
        for g, h in zip(p.G, p.H):
            cols.append(np.abs(np.minimum(ex.evaluate_batch(g, X), ex.evaluate_batch(h, X))))
        return np.array(cols).reshape(len(cols), X.shape[0])

    def max(self, X):
        C = self.components(X)
        if C.shape[0] == 0:
            return np.zeros(X.shape[0])
        return np.max(np.where(np.isnan(C), np.inf, C), axis=0)

    def signed(self, x):
        """Residual vector for the projection step: violated inequalities,
        every equality, and the smaller member of each complementarity pair."""
        p = self.p
        X = x[None, :]
        out = []
        for e in p.ineq:
            v = ex.evaluate_batch(e, X)[0]
            out.append(max(v, 0.0))
        for e in p.eq:
            out.append(ex.evaluate_batch(e, X)[0])
        for g, h in zip(p.G, p.H):
            out.append(min(ex.evaluate_batch(g, X)[0], ex.evaluate_batch(h, X)[0]))
        return np.array(out)


def _project(res: _Residuals, x0, radius, tol, iters=30):
    """Minimum-norm Gauss-Newton steps towards K; the point if it lands
    within ``radius`` of ``x0``."""
    x = x0.copy()
    n = len(x)
    fd = 1e-7
    for _ in range(iters):
        r = res.signed(x)
        if not np.all(np.isfinite(r)):
            return None
        if res.max(x[None, :])[0] <= tol:
            return x if np.linalg.norm(x - x0) <= radius else None
        J = np.empty((len(r), n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = fd
            J[:, j] = (res.signed(x + e) - res.signed(x - e)) / (2 * fd)
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return None
        x = x + step
        if np.linalg.norm(x - x0) > 2 * radius:
            return None
    return None


def _grid_offsets(n):
    if n <= 4:
        vs = [np.array(v, dtype=float) for v in itertools.product((-1, 0, 1), repeat=n) if any(v)]
    else:
        vs = [s * np.eye(n)[i] for i in range(n) for s in (1.0, -1.0)]
    return np.array([v / np.linalg.norm(v) for v in vs])


@dataclass(frozen=True)
class ProbeResult:
    verdict: str  # member, non-member, inconclusive
    trace: tuple  # (t, outcome) per step

    def summary(self) -> str:
        fails = sum(1 for _, o in self.trace if o == "fail")
        return f"{self.verdict}: {len(self.trace) - fails}/{len(self.trace)} steps found feasible points"


def tangent_cone_member(p: MPECProblem, k, d, cfg: TangentProbeConfig = DEFAULT_PROBE) -> ProbeResult:
    """Probe d in T(K, k*) along t_z -> 0.

    Each step looks for a feasible point near k* + t d: the point itself,
    then a fixed grid of perturbations, then a projection.
    """
    d = to_vector(d)
    if all(c == 0 for c in d):
        return ProbeResult("member", ())
    res = _Residuals(p)
    kf = np.array([float(c) for c in ex.as_point(k)])
    u = np.array([float(c) for c in d])
    u /= np.linalg.norm(u)
    offsets = _grid_offsets(len(kf))
    trace = []
    for t in cfg.steps():
        x = kf + t * u
        r = cfg.radius(t)
        tol = cfg.tolerance(t)
        direct = res.max(x[None, :])[0]
        if math.isinf(direct):
            raise DomainError(f"constraints cannot be evaluated at {tuple(x)}")
        if direct <= tol:
            trace.append((t, "direct"))
            continue
        cand = np.vstack([x + s * r * offsets for s in (0.25, 0.5, 0.75, 1.0)])
        if np.any(res.max(cand) <= tol):
            trace.append((t, "grid"))
            continue
        trace.append((t, "projection" if _project(res, x, r, tol) is not None else "fail"))
    ok = [o != "fail" for _, o in trace]
    if all(ok[cfg.burn_in:]):
        verdict = "member"
    elif not any(ok[-cfg.fail_run:]):
        verdict = "non-member"
    else:
        verdict = "inconclusive"
    return ProbeResult(verdict, tuple(trace))


def _fmt_trace(pr: ProbeResult, last=6):
    return [f"t=2^{round(math.log2(t))}: {o}" for t, o in pr.trace[-last:]]


# ---------------------------------------------------------------------------
# exact path for piecewise-affine constraints

def _pl_form(e: ex.Expr, n: int):
    """``(a, b, [(c, (a_j, b_j)), ...])`` with e = a.k + b + sum c |a_j.k + b_j|, or None."""
    aff = ex.affine_form(e, n)
    if aff is not None:
        return aff[0], aff[1], []
    op = e.op
    if op == "abs":
        inner = ex.affine_form(e.args[0], n)
        if inner is None:
            return None
        return tuple(Fraction(0) for _ in range(n)), Fraction(0), [(Fraction(1), inner)]
    if op == "add":
        parts = [_pl_form(a, n) for a in e.args]
        if any(x is None for x in parts):
            return None
        a = tuple(sum((q[0][i] for q in parts), Fraction(0)) for i in range(n))
        return a, sum((q[1] for q in parts), Fraction(0)), [t for q in parts for t in q[2]]
    if op == "neg":
        q = _pl_form(e.args[0], n)
        if q is None:
            return None
        return tuple(-c for c in q[0]), -q[1], [(-c, t) for c, t in q[2]]
    if op in ("mul", "div"):
        if op == "mul":
            consts = [a for a in e.args if ex.is_constant(a)]
            rest = [a for a in e.args if not ex.is_constant(a)]
            if len(rest) != 1:
                return None
            scale = Fraction(1)
            for a in consts:
                v = ex.evaluate(a, ())
                if not ex.is_exact(v):
                    return None
                scale *= v
        else:
            if not ex.is_constant(e.args[1]):
                return None
            v = ex.evaluate(e.args[1], ())
            if not ex.is_exact(v) or v == 0:
                return None
            scale, rest = 1 / v, [e.args[0]]
        q = _pl_form(rest[0], n)
        if q is None:
            return None
        return tuple(scale * c for c in q[0]), scale * q[1], [(scale * c, t) for c, t in q[2]]
    if op == "pow" and e.value == 1:
        return _pl_form(e.args[0], n)
    return None


def _canonical(a):
    """Representative of the line through a (first nonzero coordinate positive)."""
    a = primitive(a)
    first = next(c for c in a if c != 0)
    return a if first > 0 else tuple(-c for c in a)


def polyhedral_pieces(p: MPECProblem, k, idx: IndexSets):
    """Tangent cones T_P of the polyhedral pieces of K at k*, or None when
    K is not recognized as a finite union of polyhedra."""
    k = ex.as_point(k)
    n = p.n
    forms = {}
    for fid, e in p.constraint_exprs():
        f = _pl_form(e, n)
        if f is None:
            return None
        forms[fid] = f
    zero_args = []
    for a, b, terms in forms.values():
        for _, (aj, bj) in terms:
            if ex.dot(aj, k) + bj == 0 and any(aj) and _canonical(aj) not in zero_args:
                zero_args.append(_canonical(aj))
    if 2 ** (len(zero_args) + len(idx.omega)) > MAX_PIECES:
        return None

    def linear(fid, sigma):
        a, b, terms = forms[fid]
        g = list(a)
        for c, (aj, bj) in terms:
            v = ex.dot(aj, k) + bj
            if v != 0:
                s = 1 if v > 0 else -1
            elif not any(aj):
                continue
            else:
                canon = _canonical(aj)
                # aj is a nonzero multiple of canon; its sign follows sigma
                ratio = next(x / y for x, y in zip(aj, canon) if y != 0)
                s = sigma[zero_args.index(canon)] * (1 if ratio > 0 else -1)
            g = [gi + c * s * ai for gi, ai in zip(g, aj)]
        return tuple(g)

    pieces = []
    for sigma in itertools.product((1, -1), repeat=len(zero_args)):
        base = [tuple(-s * c for c in a) for s, a in zip(sigma, zero_args)]
        for i in idx.I_ell:
            base.append(linear(f"ell{i}", sigma))
        for j in range(1, p.q + 1):
            g = linear(f"h{j}", sigma)
            base += [g, tuple(-c for c in g)]
        for i in idx.theta:
            g = linear(f"G{i}", sigma)
            base += [g, tuple(-c for c in g)]
        for i in idx.upsilon:
            g = linear(f"H{i}", sigma)
            base += [g, tuple(-c for c in g)]
        for choice in itertools.product("GH", repeat=len(idx.omega)):
            rows = list(base)
            for i, c in zip(idx.omega, choice):
                gz = linear(f"{c}{i}", sigma)
                other = linear(f"{'H' if c == 'G' else 'G'}{i}", sigma)
                rows += [gz, tuple(-x for x in gz), tuple(-x for x in other)]
            pieces.append(HalfspaceCone(tuple(rows), n))
    return pieces


def cone_in_union(cone: HalfspaceCone, pieces):
    """``(True, None)`` if cone lies in the union of ``pieces``, else
    ``(False, d)`` with d in cone outside every piece."""
    n = cone.dim
    gens = GeneratedCone(cone.normals, n)
    choices = []
    for piece in pieces:
        rows = [r for r in piece.normals if not cone_member(gens, r)[0]]
        if not rows:
            return True, None
        choices.append(rows)
    base = [(g, 0) for g in cone.normals]

    def search(i, chosen):
        if find_point(n, le=base + [(tuple(-c for c in r), -1) for r in chosen]) is None:
            return None
        if i == len(choices):
            return find_point(n, le=base + [(tuple(-c for c in r), -1) for r in chosen])
        for r in choices[i]:
            got = search(i + 1, chosen + [r])
            if got is not None:
                return got
        return None

    d = search(0, [])
    return (True, None) if d is None else (False, primitive(d))


# ---------------------------------------------------------------------------
# the checks

@dataclass
class _Context:
    p: MPECProblem
    k: tuple
    idx: IndexSets
    fams: object
    pieces: Optional[list]


def _context(p, k, provider=None, index_sets=None):
    k = ex.as_point(k)
    idx = index_sets or compute_index_sets(p, k)
    provider = provider or SubdifferentialProvider(p, k)
    fams = assemble_families(p, k, provider, idx)
    return _Context(p, k, idx, fams, polyhedral_pieces(p, k, idx))


def _test_rays(cone: HalfspaceCone, cfg: TangentProbeConfig):
    rays = list(extreme_rays(cone))
    if rays and cfg.random_rays:
        rng = np.random.default_rng(cfg.seed)
        for _ in range(cfg.random_rays):
            w = rng.integers(1, 5, len(rays))
            v = tuple(sum((int(wi) * r[i] for wi, r in zip(w, rays)), Fraction(0))
                      for i in range(cone.dim))
            if any(v) and primitive(v) not in rays:
                rays.append(primitive(v))
    return rays


def _probe_cones(name, ctx, cones, cfg, member_test):
    tested = 0
    pending = None
    for cone in cones:
        try:
            rays = _test_rays(cone, cfg)
        except DimensionTooLarge as exc:
            return CQVerdict(name, "inconclusive", reason=str(exc))
        for d in rays:
            tested += 1
            try:
                verdict, trace = member_test(d)
            except DomainError as exc:
                return CQVerdict(name, "inconclusive", tested, cfg.depth, tuple(d),
                                 reason=f"probe could not evaluate the constraints: {exc}")
            if verdict == "non-member":
                return CQVerdict(name, "refuted", tested, cfg.depth, tuple(d), tuple(trace))
            if verdict == "inconclusive" and pending is None:
                pending = (d, trace)
    if pending is not None:
        return CQVerdict(name, "inconclusive", tested, cfg.depth, tuple(pending[0]),
                         tuple(pending[1]), "mixed probe evidence")
    if tested == 0:
        return CQVerdict(name, "holds-exact", 0, reason="the cone is {0}")
    return CQVerdict(name, "holds-on-samples", tested, cfg.depth)


def _tangent_test(ctx, cfg):
    def test(d):
        pr = tangent_cone_member(ctx.p, ctx.k, d, cfg)
        return pr.verdict, _fmt_trace(pr)
    return test


def _exact(name, cones, pieces):
    for cone in cones:
        ok, d = cone_in_union(cone, pieces)
        if not ok:
            return CQVerdict(name, "refuted", len(cones), witness=d,
                             trace=(f"{fmt_vector(d)} violates every linearized piece of K",))
    return CQVerdict(name, "holds-exact", len(cones), reason=f"{len(pieces)} polyhedral pieces")


def _guard(name, fn):
    try:
        return fn()
    except AllPoolsEmpty as exc:
        return CQVerdict(name, "undefined", reason=str(exc))
    except RuleFailure as exc:
        return CQVerdict(name, "inconclusive", reason=f"blocked: supply manual subdifferential for {exc.function}")


def check_gs_acq(p: MPECProblem, k, cfg: TangentProbeConfig = DEFAULT_PROBE,
                 provider=None, index_sets=None) -> CQVerdict:
    """Pi(k*) inside T(K, k*)."""
    def run():
        ctx = _context(p, k, provider, index_sets)
        pi = build_pi(ctx.fams)
        if ctx.pieces is not None:
            return _exact("GS-ACQ", [pi], ctx.pieces)
        return _probe_cones("GS-ACQ", ctx, [pi], cfg, _tangent_test(ctx, cfg))
    return _guard("GS-ACQ", run)


def check_mpec_acq(p: MPECProblem, k, cfg: TangentProbeConfig = DEFAULT_PROBE,
                   provider=None, index_sets=None) -> CQVerdict:
    """Both branches of Psi(k*) inside T(K, k*)."""
    def run():
        ctx = _context(p, k, provider, index_sets)
        psi = build_psi(ctx.fams)
        if ctx.pieces is not None:
            return _exact("MPEC-ACQ", list(psi.branches), ctx.pieces)
        return _probe_cones("MPEC-ACQ", ctx, list(psi.branches), cfg, _tangent_test(ctx, cfg))
    return _guard("MPEC-ACQ", run)


DCON_SCALES = (Fraction(1), Fraction(1, 4), Fraction(1, 16))
DCON_GRID = 64
CLOSURE_ETAS = (2.0 ** -4, 2.0 ** -6, 2.0 ** -8)


def _dcon_member(res, kf, u, tol):
    """Some delta with k* + lam u feasible on the whole grid of (0, delta]."""
    for delta in DCON_SCALES:
        lam = float(delta) * np.arange(1, DCON_GRID + 1) / DCON_GRID
        X = kf + lam[:, None] * u
        vals = res.max(X)
        if np.any(np.isnan(vals)):
            raise DomainError("constraints cannot be evaluated along the ray")
        if np.all(vals <= tol):
            return float(delta)
    return None


def check_zangwill(p: MPECProblem, k, cfg: TangentProbeConfig = DEFAULT_PROBE,
                   provider=None, index_sets=None) -> CQVerdict:
    """Both branches of Psi(k*) inside the closure of the feasible-direction cone."""
    def run():
        ctx = _context(p, k, provider, index_sets)
        psi = build_psi(ctx.fams)
        if ctx.pieces is not None:
            # each piece is a polyhedron, so its feasible directions are T_P
            return _exact("Zangwill", list(psi.branches), ctx.pieces)
        res = _Residuals(p)
        kf = np.array([float(c) for c in ctx.k])
        offsets = _grid_offsets(p.n)

        def test(d):
            u = np.array([float(c) for c in d])
            u /= np.linalg.norm(u)
            delta = _dcon_member(res, kf, u, cfg.tol_floor)
            if delta is not None:
                return "member", [f"feasible for lambda in (0, {delta}] on a {DCON_GRID}-point grid"]
            trace = ["ray itself leaves K on every delta grid"]
            for eta in CLOSURE_ETAS:
                near = [w for w in u + eta * offsets
                        if _dcon_member(res, kf, w / np.linalg.norm(w), cfg.tol_floor) is not None]
                trace.append(f"eta={eta}: {len(near)} of {len(offsets)} perturbed rays feasible")
                if not near:
                    return "non-member", trace
            return "member", trace

        return _probe_cones("Zangwill", ctx, list(psi.branches), cfg, test)
    return _guard("Zangwill", run)


# ---------------------------------------------------------------------------
# weak reverse convex CQ

CONTINUITY_RADII = tuple(2.0 ** -z for z in range(4, 21))


def continuity_probe(e: ex.Expr, k, base_value=None, tol: float = 1e-6, seed: int = 0):
    """``(ok, note)``: values on shrinking spheres around k approach e(k)."""
    k = ex.as_point(k)
    n = len(k)
    f0 = float(base_value if base_value is not None else ex.evaluate(e, k))
    rng = np.random.default_rng(seed)
    D = np.vstack([np.eye(n), -np.eye(n), rng.standard_normal((16, n))])
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    kf = np.array([float(c) for c in k])
    dev = None
    for r in CONTINUITY_RADII:
        vals = ex.evaluate_batch(e, kf + r * D)
        if np.any(np.isnan(vals)):
            return False, f"undefined at distance {r} from k*"
        dev = float(np.max(np.abs(vals - f0)))
    if dev > tol:
        return False, f"oscillation {dev:.3g} at distance {CONTINUITY_RADII[-1]}"
    return True, ""


def wrc_inventory(p: MPECProblem, idx: IndexSets):
    """``(function id, requirement)`` in checking order."""
    out = [(f"ell{i}", "pseudoconcave") for i in idx.I_ell]
    out += [(f"ell{i}", "continuous") for i in range(1, p.p + 1) if i not in idx.I_ell]
    out += [(f"G{i}", "continuous") for i in idx.upsilon]
    out += [(f"H{i}", "continuous") for i in idx.theta]
    out += [(f"h{j}", "pseudoaffine") for j in range(1, p.q + 1)]
    out += [(f"G{i}", "pseudoaffine") for i in sorted(idx.theta + idx.omega)]
    out += [(f"H{i}", "pseudoaffine") for i in sorted(idx.upsilon + idx.omega)]
    return out


def check_weak_reverse_convex(p: MPECProblem, k, samples: SampleConfig = DEFAULT_SAMPLES,
                              provider=None, index_sets=None) -> CQVerdict:
    """Generalized-convexity inventory on the constraints, sampled.

    Pseudoaffine is taken as pseudoconvex and pseudoconcave together.
    """
    name = "WRC"
    k = ex.as_point(k)
    idx = index_sets or compute_index_sets(p, k)
    inventory = wrc_inventory(p, idx)
    if not inventory:
        return CQVerdict(name, "holds-exact", reason="no constraint carries a requirement")
    trace = []
    notes = []
    count = 0
    for fid, req in inventory:
        e = p.function(fid)
        count += 1
        try:
            if req == "continuous":
                try:
                    base = p.value(fid, k)
                except DomainError as exc:
                    return CQVerdict(name, "inconclusive", count, trace=tuple(trace),
                                     reason=f"continuity probe failed for {fid}: {exc}")
                ok, why = continuity_probe(e, k, base, seed=samples.seed)
                if not ok:
                    return CQVerdict(name, "inconclusive", count, trace=tuple(trace),
                                     reason=f"continuity probe failed for {fid}: {why}")
                trace.append(f"{fid} continuous on probes")
                continue
            neg = p.manual_for("-" + fid, k)
            manual = None if neg is None else neg.vertices
            if req == "pseudoconcave":
                v = check_pseudoconcave(e, k, samples, manual)
            else:
                v = check_pseudoaffine(e, k, samples, manual)
        except (RuleFailure, DomainError) as exc:
            return CQVerdict(name, "inconclusive", count, trace=tuple(trace),
                             reason=f"{fid} {req}: {exc}")
        if v.note:
            notes.append(f"{fid}: {v.note}")
        if v.refuted:
            trace.append(f"{fid} {req} refuted: t = {fmt_vector(v.witness_t)}, "
                         f"xi = {fmt_vector(v.witness_xi)}")
            return CQVerdict(name, "refuted", count, witness=v.witness_t, trace=tuple(trace),
                             reason="; ".join(notes))
        trace.append(f"{fid} {req}: no violation in {v.samples} samples")
    notes.insert(0, "pseudoaffine read as pseudoconvex and pseudoconcave")
    return CQVerdict(name, "holds-on-samples", count, trace=tuple(trace), reason="; ".join(notes))
