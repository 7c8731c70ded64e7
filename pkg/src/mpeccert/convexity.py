"""Falsification checks for generalized convexity through the tangential
subdifferential, and the sufficiency verdict built on them.

Every check samples trial points t and tests the implication

    pseudoconvex:  f(t) <  f(k)  =>  <xi, t - k> <  0   for all xi
    quasiconvex:   f(t) <= f(k)  =>  <xi, t - k> <= 0   for all xi

The right-hand side is linear in xi, so testing the vertices of the
subdifferential decides it for the whole set.  A clean run is evidence,
never a proof: the definitions quantify over all of R^n.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import expr as ex
from .cones import VertexPolytope, dot
from .errors import DomainError, RuleFailure
from .model import IndexSets, MPECProblem, SubdifferentialProvider, compute_index_sets
from .tangential import Subdifferential, build_subdifferential


@dataclass(frozen=True)
class SampleConfig:
    """Trial points: the signed unit axes around k, every grid point of
    step ``grid_step`` inside the ball (for n <= ``grid_max_dim``), then
    ``samples`` seeded uniform points of the ball."""

    radius: Fraction = Fraction(2)
    samples: int = 10_000
    grid_step: Fraction = Fraction(1, 4)
    grid_max_dim: int = 3
    seed: int = 0
    tol: float = 1e-9  # float prefilter only; candidates are re-checked exactly


DEFAULT_SAMPLES = SampleConfig()


@dataclass(frozen=True)
class ConvexityVerdict:
    prop: str
    status: str  # "no-violation" or "refuted"
    samples: int
    region: str
    seed: int
    skipped: int = 0
    witness_t: Optional[tuple] = None
    witness_xi: Optional[tuple] = None
    note: str = ""

    @property
    def refuted(self) -> bool:
        return self.status == "refuted"

    def to_dict(self) -> dict:
        out = {"property": self.prop, "status": self.status, "samples": self.samples,
               "skipped": self.skipped, "region": self.region, "seed": self.seed}
        if self.refuted:
            out["witness"] = {"t": [str(c) for c in self.witness_t],
                              "xi": [str(c) for c in self.witness_xi]}
        if self.note:
            out["note"] = self.note
        return out


# ---------------------------------------------------------------------------
# trial points

def _axis_points(k):
    n = len(k)
    out = []
    for i in range(n):
        for s in (1, -1):
            out.append(tuple(c + (s if j == i else 0) for j, c in enumerate(k)))
    return out


def _grid_points(k, cfg):
    n = len(k)
    if n > cfg.grid_max_dim:
        return []
    steps = int(cfg.radius / cfg.grid_step)
    r2 = cfg.radius ** 2
    out = []
    for offs in itertools.product(range(-steps, steps + 1), repeat=n):
        u = tuple(o * cfg.grid_step for o in offs)
        if sum(c * c for c in u) <= r2 and any(u):
            out.append(tuple(a + b for a, b in zip(k, u)))
    return out


def _random_points(k, cfg):
    n = len(k)
    rng = np.random.default_rng(cfg.seed)
    D = rng.standard_normal((cfg.samples, n))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    r = float(cfg.radius) * rng.uniform(0.0, 1.0, cfg.samples) ** (1.0 / n)
    return np.array([float(c) for c in k]) + r[:, None] * D


def trial_points(k, cfg: SampleConfig = DEFAULT_SAMPLES):
    """``(exact points, float array)``; floats are exact binary rationals."""
    k = ex.as_point(k)
    exact = _axis_points(k) + _grid_points(k, cfg)
    return exact, _random_points(k, cfg)


def region_label(cfg: SampleConfig) -> str:
    return f"ball radius {cfg.radius}, grid step {cfg.grid_step}, {cfg.samples} seeded points"


# ---------------------------------------------------------------------------
# core sampler

def _implication_fails(strict, ft, fk, products):
    if strict:
        return ft < fk and max(products) >= 0
    return ft <= fk and max(products) > 0


def _check(e, k, s, strict, prop, cfg, base_value=None) -> ConvexityVerdict:
    k = ex.as_point(k)
    verts = s.vertices if isinstance(s, Subdifferential) else VertexPolytope(s).vertices
    fk = ex.as_scalar(base_value) if base_value is not None else ex.evaluate(e, k)
    exact_pts, X = trial_points(k, cfg)
    rows = [tuple(float(c) for c in t) for t in exact_pts]
    allX = np.vstack([np.array(rows).reshape(-1, len(k)), X])
    fvals = ex.evaluate_batch(e, allX)
    V = np.array([[float(c) for c in v] for v in verts])
    kf = np.array([float(c) for c in k])
    prods = (allX - kf) @ V.T
    skipped = int(np.count_nonzero(np.isnan(fvals)))
    fk_f = float(fk)
    tol = cfg.tol * max(1.0, abs(fk_f))
    with np.errstate(invalid="ignore"):
        cand = (fvals <= fk_f + tol) & (np.max(prods, axis=1) >= -cfg.tol * 10)
    for idx in np.flatnonzero(cand):
        t = exact_pts[idx] if idx < len(exact_pts) else tuple(Fraction(float(c)) for c in allX[idx])
        try:
            ft = ex.evaluate(e, t)
        except DomainError:
            continue
        diff = tuple(a - b for a, b in zip(t, k))
        products = [dot(v, diff) for v in verts]
        if _implication_fails(strict, ft, fk, products):
            xi = next(v for v, p in zip(verts, products) if (p >= 0 if strict else p > 0))
            return ConvexityVerdict(prop, "refuted", int(idx) + 1, region_label(cfg), cfg.seed,
                                    skipped, t, xi)
    return ConvexityVerdict(prop, "no-violation", len(allX) - skipped, region_label(cfg),
                            cfg.seed, skipped)


def check_pseudoconvex(e: ex.Expr, k, s, cfg: SampleConfig = DEFAULT_SAMPLES,
                       base_value=None) -> ConvexityVerdict:
    """f(t) < f(k) must force <xi, t - k> < 0 for every xi in ``s``."""
    return _check(e, k, s, True, "pseudoconvex", cfg, base_value)


def check_quasiconvex(e: ex.Expr, k, s, cfg: SampleConfig = DEFAULT_SAMPLES,
                      base_value=None) -> ConvexityVerdict:
    """f(t) <= f(k) must force <xi, t - k> <= 0 for every xi in ``s``."""
    return _check(e, k, s, False, "quasiconvex", cfg, base_value)


def negated_subdifferential(e: ex.Expr, k, manual=None):
    """Subdifferential of -e at k and a note on how it was obtained.

    When the calculus cannot handle -e (a negated kink), the set -d(e) is
    used instead and the note says so.
    """
    k = ex.as_point(k)
    neg = e.args[0] if e.op == "neg" else ex.neg(e)  # -(-g) is g
    if manual is not None:
        return build_subdifferential(neg, k, manual_override=manual, check_manual=False), ""
    try:
        return build_subdifferential(neg, k), ""
    except RuleFailure:
        s = build_subdifferential(e, k)
        return (Subdifferential(k, s.polytope.negated(), "negated"),
                "subdifferential of -f unavailable; used -(subdifferential of f)")


def _concave(check, prop, e, k, cfg, manual):
    s, note = negated_subdifferential(e, k, manual)
    v = check(ex.neg(e), k, s, cfg)
    return ConvexityVerdict(prop, v.status, v.samples, v.region, v.seed, v.skipped,
                            v.witness_t, v.witness_xi, note)


def check_pseudoconcave(e: ex.Expr, k, cfg: SampleConfig = DEFAULT_SAMPLES, manual=None):
    return _concave(check_pseudoconvex, "pseudoconcave", e, k, cfg, manual)


def check_quasiconcave(e: ex.Expr, k, cfg: SampleConfig = DEFAULT_SAMPLES, manual=None):
    return _concave(check_quasiconvex, "quasiconcave", e, k, cfg, manual)


def check_pseudoaffine(e: ex.Expr, k, cfg: SampleConfig = DEFAULT_SAMPLES, manual_neg=None):
    """Pseudoconvex and pseudoconcave; the first refutation wins."""
    k = ex.as_point(k)
    cvx = check_pseudoconvex(e, k, build_subdifferential(e, k), cfg)
    if cvx.refuted:
        return ConvexityVerdict("pseudoaffine", "refuted", cvx.samples, cvx.region, cvx.seed,
                                cvx.skipped, cvx.witness_t, cvx.witness_xi,
                                "pseudoconvexity fails")
    ccv = check_pseudoconcave(e, k, cfg, manual_neg)
    note = "pseudoconcavity fails" if ccv.refuted else ccv.note
    return ConvexityVerdict("pseudoaffine", ccv.status, cvx.samples + ccv.samples, ccv.region,
                            ccv.seed, cvx.skipped + ccv.skipped, ccv.witness_t,
                            ccv.witness_xi, note)


# ---------------------------------------------------------------------------
# sufficiency

@dataclass(frozen=True)
class MuIndexSets:
    omega_G: tuple
    omega_H: tuple
    theta_plus: tuple
    upsilon_plus: tuple

    def first_nonempty(self):
        for name in ("omega_G", "omega_H", "theta_plus", "upsilon_plus"):
            if getattr(self, name):
                return name
        return None


def mu_index_sets(cert, idx: IndexSets) -> MuIndexSets:
    mg = cert.multipliers.get("mu_G", {})
    mh = cert.multipliers.get("mu_H", {})
    return MuIndexSets(
        tuple(i for i in idx.omega if mh.get(i, 0) == 0 and mg.get(i, 0) > 0),
        tuple(i for i in idx.omega if mg.get(i, 0) == 0 and mh.get(i, 0) > 0),
        tuple(i for i in idx.theta if mg.get(i, 0) > 0),
        tuple(i for i in idx.upsilon if mh.get(i, 0) > 0))


@dataclass(frozen=True)
class SufficiencyVerdict:
    status: str  # "global-min-certified", "hypothesis-failed", "index-sets-nonempty"
    detail: str
    mu_sets: MuIndexSets
    checks: tuple = ()  # (function id, ConvexityVerdict)
    failed: Optional[ConvexityVerdict] = None

    def to_dict(self) -> dict:
        return {"status": self.status, "detail": self.detail,
                "mu_index_sets": {k: list(getattr(self.mu_sets, k)) for k in
                                  ("omega_G", "omega_H", "theta_plus", "upsilon_plus")},
                "checks": [{"function": f, **v.to_dict()} for f, v in self.checks]}


def sufficiency_hypotheses(p: MPECProblem, idx: IndexSets):
    """``(function id, property)`` pairs in the order they are checked."""
    out = [("J", "pseudoconvex")]
    out += [(f"ell{i}", "quasiconvex") for i in idx.I_ell]
    for j in range(1, p.q + 1):
        out += [(f"h{j}", "quasiconvex"), (f"-h{j}", "quasiconvex")]
    out += [(f"-G{i}", "quasiconvex") for i in sorted(idx.theta + idx.omega)]
    out += [(f"-H{i}", "quasiconvex") for i in sorted(idx.upsilon + idx.omega)]
    return out


def sufficiency_check(p: MPECProblem, k, cert, cfg: SampleConfig = DEFAULT_SAMPLES,
                      provider=None, index_sets=None) -> SufficiencyVerdict:
    """Global optimality of a GA-stationary point under generalized convexity.

    Needs the four mu-index sets empty, then samples each convexity
    hypothesis; the first refuted one is reported.
    """
    k = ex.as_point(k)
    idx = index_sets or compute_index_sets(p, k)
    provider = provider or SubdifferentialProvider(p, k)
    mu = mu_index_sets(cert, idx)
    name = mu.first_nonempty()
    if name is not None:
        return SufficiencyVerdict("index-sets-nonempty", name, mu)
    checks = []
    for fid, prop in sufficiency_hypotheses(p, idx):
        e = p.function(fid)
        s = provider.get(fid)
        check = check_pseudoconvex if prop == "pseudoconvex" else check_quasiconvex
        v = check(e, k, s, cfg, s.base_value)
        checks.append((fid, v))
        if v.refuted:
            return SufficiencyVerdict("hypothesis-failed", f"{fid} {prop}", mu, tuple(checks), v)
    return SufficiencyVerdict("global-min-certified", "all hypotheses pass on samples (not a proof)",
                              mu, tuple(checks))
