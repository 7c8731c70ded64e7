"""GA- and GS-stationarity as exact LP feasibility.

The stationarity system asks for

    0 in dJ + sum lambda_t * dF_t

with nonnegative multipliers and a zero pattern on the complementarity
indices.  Because {lam * xi : lam >= 0, xi in conv(V)} = cone(V), the
bilinear system collapses to one LP per zero pattern: convex weights over
the vertices of dJ plus nonnegative weights over the vertices of every
allowed term.  Multipliers and subgradients are read back from the LP
solution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import expr as ex
from .cones import convex_weights, dot, lp_feasible, to_vector, vadd, vscale
from .errors import BranchCapExceeded
from .model import IndexSets, MPECProblem, SubdifferentialProvider, compute_index_sets

FAMILIES = ("lambda_ell", "lambda_h", "mu_h", "lambda_G", "lambda_H", "mu_G", "mu_H")
DEFAULT_BRANCH_CAP = 20


@dataclass(frozen=True)
class SelectedSubgradient:
    function: str
    vector: tuple
    vertices: tuple
    weights: tuple


@dataclass(frozen=True)
class StationarityCertificate:
    kind: str  # "GS" or "GA"
    multipliers: dict  # family -> {index: Fraction}
    subgradients: dict  # "J" or "family[i]" -> SelectedSubgradient
    branch: Optional[dict] = None  # i in Omega -> "G" or "H": which mu may be nonzero

    def nonzero(self):
        """``(family, index, value)`` for every positive multiplier."""
        return [(fam, i, v) for fam in FAMILIES
                for i, v in sorted(self.multipliers.get(fam, {}).items()) if v != 0]


def term_function(family: str, i: int) -> str:
    return {
        "lambda_ell": f"ell{i}",
        "lambda_h": f"h{i}",
        "mu_h": f"-h{i}",
        "lambda_G": f"-G{i}",
        "lambda_H": f"-H{i}",
        "mu_G": f"G{i}",
        "mu_H": f"H{i}",
    }[family]


def allowed_terms(p: MPECProblem, idx: IndexSets, omega_mu: dict) -> list:
    """Terms that may carry a nonzero multiplier.

    ``omega_mu`` maps each degenerate index to the set of mu-families
    ("G", "H") left free on it.
    """
    terms = [("lambda_ell", i) for i in idx.I_ell]
    for j in range(1, p.q + 1):
        terms += [("lambda_h", j), ("mu_h", j)]
    for i in range(1, p.m + 1):
        cls = idx.classify(i)
        if cls != "upsilon":
            terms.append(("lambda_G", i))
        if cls != "theta":
            terms.append(("lambda_H", i))
        if cls == "theta" or (cls == "omega" and "G" in omega_mu.get(i, ())):
            terms.append(("mu_G", i))
        if cls == "upsilon" or (cls == "omega" and "H" in omega_mu.get(i, ())):
            terms.append(("mu_H", i))
    return terms


def _empty_multipliers(p, idx):
    return {
        "lambda_ell": {i: Fraction(0) for i in idx.I_ell},
        "lambda_h": {j: Fraction(0) for j in range(1, p.q + 1)},
        "mu_h": {j: Fraction(0) for j in range(1, p.q + 1)},
        "lambda_G": {i: Fraction(0) for i in range(1, p.m + 1)},
        "lambda_H": {i: Fraction(0) for i in range(1, p.m + 1)},
        "mu_G": {i: Fraction(0) for i in range(1, p.m + 1)},
        "mu_H": {i: Fraction(0) for i in range(1, p.m + 1)},
    }


ENRICHED = ("lambda_ell", "lambda_G", "lambda_H")


def _lp(p, provider, terms, floors):
    """Solve the branch LP; ``floors`` lists terms whose multiplier must be >= 1."""
    obj = provider.get("J").polytope
    columns = [("J", None, v) for v in obj.vertices]
    polys = {}
    for fam, i in terms:
        poly = provider.get(term_function(fam, i)).polytope
        polys[(fam, i)] = poly
        columns += [(fam, i, v) for v in poly.vertices]
    width = len(columns) + len(floors)
    A = [tuple(col[2][r] for col in columns) + (0,) * len(floors) for r in range(p.n)]
    b = [0] * p.n
    for s, term in enumerate(floors):
        row = [int((col[0], col[1]) == term) for col in columns] + [0] * len(floors)
        row[len(columns) + s] = -1
        A.append(tuple(row))
        b.append(1)
    cert = lp_feasible(A, b, convex_groups=[list(range(len(obj.vertices)))], n_vars=width)
    if not cert.feasible:
        return None
    return obj, polys, cert.x[:len(columns)]


def solve_branch(p: MPECProblem, k, provider: SubdifferentialProvider, idx: IndexSets,
                 omega_mu: dict, kind: str, branch=None) -> Optional[StationarityCertificate]:
    """One LP per zero pattern: does 0 lie in dJ + cone(allowed term vertices)?

    Among feasible certificates, those with mu = 0 off the degenerate set
    are preferred, and the inequality and complementarity multipliers are
    then pushed to >= 1 one at a time (in term order) where the system
    allows it, so the certificate exposes the constraints that can bind.
    """
    terms = allowed_terms(p, idx, omega_mu)
    restricted = [t for t in terms
                  if not (t[0] in ("mu_G", "mu_H") and idx.classify(t[1]) != "omega")]
    for candidate in (restricted, terms) if restricted != terms else (terms,):
        sol = _lp(p, provider, candidate, [])
        if sol is not None:
            terms = candidate
            break
    else:
        return None
    floors = []
    for t in terms:
        partner = ("mu" + t[0][6:], t[1])
        # a lambda/mu pair on the same function just cancels; leave it alone
        if t[0] in ENRICHED and partner not in terms:
            trial = _lp(p, provider, terms, floors + [t])
            if trial is not None:
                floors.append(t)
                sol = trial
    obj, polys, x = sol
    alpha = x[:len(obj.vertices)]
    subgradients = {
        "J": SelectedSubgradient("J", _combine(obj.vertices, alpha), obj.vertices, alpha)}
    multipliers = _empty_multipliers(p, idx)
    pos = len(obj.vertices)
    for fam, i in terms:
        verts = polys[(fam, i)].vertices
        beta = x[pos:pos + len(verts)]
        pos += len(verts)
        lam = sum(beta, Fraction(0))
        multipliers[fam][i] = lam
        if lam > 0:
            weights = tuple(b / lam for b in beta)
            subgradients[f"{fam}[{i}]"] = SelectedSubgradient(
                term_function(fam, i), _combine(verts, weights), verts, weights)
    return StationarityCertificate(kind, multipliers, subgradients, branch)


def _combine(vertices, weights):
    out = tuple(Fraction(0) for _ in vertices[0])
    for v, w in zip(vertices, weights):
        if w:
            out = vadd(out, vscale(w, v))
    return out


def _prepare(p, k, provider, index_sets):
    k = ex.as_point(k)
    idx = index_sets or compute_index_sets(p, k)
    provider = provider or SubdifferentialProvider(p, k)
    return k, idx, provider


def check_gs_stationary(p: MPECProblem, k, provider=None, index_sets=None) -> Optional[StationarityCertificate]:
    """Certificate of GS-stationarity (mu^G = mu^H = 0 on Omega), or None."""
    k, idx, provider = _prepare(p, k, provider, index_sets)
    return solve_branch(p, k, provider, idx, {}, "GS")


def ga_branches(omega):
    """The all-zero pattern first, then every one-sided pattern."""
    yield {i: "-" for i in omega}
    for choice in itertools.product("GH", repeat=len(omega)):
        yield dict(zip(omega, choice))


def check_ga_stationary(p: MPECProblem, k, provider=None, index_sets=None,
                        branch_cap: int = DEFAULT_BRANCH_CAP) -> Optional[StationarityCertificate]:
    """Certificate of GA-stationarity (mu^G_i = 0 or mu^H_i = 0 on Omega), or None.

    Branches are tried in a fixed order and the first feasible one wins.
    """
    k, idx, provider = _prepare(p, k, provider, index_sets)
    if len(idx.omega) > branch_cap:
        raise BranchCapExceeded(len(idx.omega), branch_cap)
    for branch in ga_branches(idx.omega):
        omega_mu = {i: () if c == "-" else (c,) for i, c in branch.items()}
        cert = solve_branch(p, k, provider, idx, omega_mu, "GA", branch)
        if cert is not None:
            return cert
    return None


# ---------------------------------------------------------------------------
# independent re-check

@dataclass(frozen=True)
class CertificateCheck:
    ok: bool
    reasons: tuple

    def __bool__(self):
        return self.ok


def verify_certificate(cert: StationarityCertificate, p: MPECProblem, k,
                       provider=None, index_sets=None) -> CertificateCheck:
    """Re-check every stationarity condition from scratch."""
    k = ex.as_point(k)
    idx = index_sets or compute_index_sets(p, k)
    provider = provider or SubdifferentialProvider(p, k)
    reasons = []
    mult = cert.multipliers
    if cert.kind not in ("GS", "GA"):
        reasons.append(f"unknown certificate kind {cert.kind!r}")

    def get(fam, i):
        return Fraction(mult.get(fam, {}).get(i, 0))

    for fam in FAMILIES:
        for i, v in mult.get(fam, {}).items():
            if v < 0:
                reasons.append(f"{fam}[{i}] = {v} is negative")
    for i, v in mult.get("lambda_ell", {}).items():
        if v != 0 and i not in idx.I_ell:
            reasons.append(f"lambda_ell[{i}] nonzero on an inactive inequality")
    for i in idx.upsilon:
        for fam in ("mu_G", "lambda_G"):
            if get(fam, i) != 0:
                reasons.append(f"{fam}[{i}] must vanish on Upsilon")
    for i in idx.theta:
        for fam in ("mu_H", "lambda_H"):
            if get(fam, i) != 0:
                reasons.append(f"{fam}[{i}] must vanish on Theta")
    for i in idx.omega:
        g, h = get("mu_G", i), get("mu_H", i)
        if cert.kind == "GS" and (g != 0 or h != 0):
            reasons.append(f"GS requires mu_G[{i}] = mu_H[{i}] = 0 on Omega")
        if cert.kind == "GA" and g != 0 and h != 0:
            reasons.append(f"GA requires mu_G[{i}] = 0 or mu_H[{i}] = 0 on Omega")

    total = None
    entries = [("J", Fraction(1))] + [(f"{fam}[{i}]", Fraction(v)) for fam in FAMILIES
                                      for i, v in mult.get(fam, {}).items() if v != 0]
    for key, lam in entries:
        sg = cert.subgradients.get(key)
        if sg is None:
            reasons.append(f"no subgradient recorded for {key}")
            continue
        fid = "J" if key == "J" else term_function(key.split("[")[0], int(key[key.index("[") + 1:-1]))
        if sg.function != fid:
            reasons.append(f"{key} subgradient belongs to {sg.function}, expected {fid}")
        w = [Fraction(x) for x in sg.weights]
        if any(x < 0 for x in w) or sum(w, Fraction(0)) != 1 or len(w) != len(sg.vertices):
            reasons.append(f"{key} weights are not convex weights")
        elif _combine(sg.vertices, w) != to_vector(sg.vector):
            reasons.append(f"{key} weights do not reproduce the subgradient")
        poly = provider.get(fid).polytope
        if convex_weights(poly.vertices, sg.vector) is None:
            reasons.append(f"{key} subgradient lies outside the subdifferential of {fid}")
        term = vscale(lam, to_vector(sg.vector))
        total = term if total is None else vadd(total, term)
    if total is not None and any(c != 0 for c in total):
        reasons.append("stationarity sum is " + "(" + ", ".join(str(c) for c in total) + "), not 0")
    return CertificateCheck(not reasons, tuple(reasons))
