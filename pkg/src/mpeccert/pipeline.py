"""Verification pipeline and report emission.

``run_pipeline`` walks feasibility, index sets, subdifferentials, cones,
stationarity, constraint qualifications, generalized convexity and
sufficiency for one candidate point.  Each stage failure is recorded in
the report instead of aborting the run.  Reports are plain dicts of
strings, ints, bools, lists and dicts, so JSON emission is canonical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from . import __version__
from . import expr as ex
from .cones import extreme_rays, prune_to_vertices
from .convexity import (SampleConfig, check_pseudoconvex, check_quasiconvex,
                        sufficiency_check)
from .cq import (TangentProbeConfig, check_gs_acq, check_mpec_acq,
                 check_weak_reverse_convex, check_zangwill)
from .errors import (AllPoolsEmpty, BranchCapExceeded, DimensionTooLarge, DomainError,
                     MPECError, RuleFailure)
from .model import (ALL_POOLS, ZERO_TOL, SubdifferentialProvider, assemble_families, build_delta,
                    build_lambda, build_pi, build_psi, check_feasible, compute_index_sets,
                    pool_members)
from .problem_io import ProblemFile
from .stationarity import (DEFAULT_BRANCH_CAP, FAMILIES, check_ga_stationary,
                           check_gs_stationary, verify_certificate)
from .tangential import DirectionSample, ProbeConfig, support_consistency, tangential_convexity_probe

SECTIONS = ("stationarity", "cq", "convexity")


@dataclass(frozen=True)
class Flags:
    sections: tuple = SECTIONS
    kind: str = "both"  # gs, ga or both
    seed: int = 0
    branch_cap: int = DEFAULT_BRANCH_CAP
    probe_depth: int = 20


def _s(x) -> str:
    return str(x) if isinstance(x, Fraction) else repr(float(x))


def _vec(v):
    return [_s(c) for c in v]


def _error(exc) -> str:
    if isinstance(exc, RuleFailure) and exc.function:
        return f"blocked: supply manual subdifferential for {exc.function} ({exc.reason})"
    return f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# stages

def _subdiff_section(p, provider, fids):
    out = {}
    for fid in fids:
        try:
            s = provider.get(fid)
        except (RuleFailure, DomainError) as exc:
            out[fid] = {"error": _error(exc)}
            continue
        entry = {"vertices": [_vec(v) for v in s.vertices], "provenance": s.provenance}
        if s.warnings:
            entry["warnings"] = list(s.warnings)
        out[fid] = entry
    return out


def _reference_section(pf, k, provider, seed):
    out = []
    for ref in pf.references:
        if ref.point != k:
            continue
        entry = {"function": ref.function, "listed": [_vec(v) for v in ref.listed]}
        try:
            s = provider.get(ref.function)
        except MPECError as exc:
            entry["error"] = _error(exc)
            out.append(entry)
            continue
        verts = set(s.vertices)
        flags = []
        for v in ref.listed:
            if v in verts:
                flags.append("vertex")
            elif s.polytope.contains(v):
                flags.append("interior")
            else:
                flags.append("outside")
        entry["flags"] = flags
        entry["same_hull"] = (set(prune_to_vertices(ref.listed)) == set(s.polytope.reduced().vertices))
        rep = support_consistency(s, pf.problem.function(ref.function),
                                  DirectionSample(seed=seed))
        entry["support_deviation"] = f"{rep.max_deviation:.3e}"
        out.append(entry)
    return out


def _cert_dict(cert, check):
    return {"kind": cert.kind,
            "branch": None if cert.branch is None else {str(i): c for i, c in sorted(cert.branch.items())},
            "multipliers": {fam: {str(i): str(v) for i, v in sorted(cert.multipliers[fam].items())}
                            for fam in FAMILIES if cert.multipliers.get(fam)},
            "subgradients": {key: _vec(sg.vector) for key, sg in sorted(cert.subgradients.items())},
            "verified": bool(check), "verification_issues": list(check.reasons)}


def _stationarity(p, k, provider, idx, flags):
    out = {}
    certs = {}
    kinds = {"gs": ("GS",), "ga": ("GA",), "both": ("GS", "GA")}[flags.kind]
    for kind in kinds:
        try:
            if kind == "GS":
                cert = check_gs_stationary(p, k, provider, idx)
            else:
                cert = check_ga_stationary(p, k, provider, idx, flags.branch_cap)
        except (RuleFailure, DomainError, BranchCapExceeded) as exc:
            out[kind] = {"status": _error(exc)}
            continue
        if cert is None:
            out[kind] = {"status": "NO"}
            continue
        check = verify_certificate(cert, p, k, provider, idx)
        out[kind] = {"status": "YES", "certificate": _cert_dict(cert, check)}
        certs[kind] = cert
    return out, certs


def _cq(p, k, provider, idx, flags):
    probe = TangentProbeConfig(depth=flags.probe_depth, seed=flags.seed)
    samples = SampleConfig(seed=flags.seed)
    out = {}
    for key, fn in (("GS-ACQ", lambda: check_gs_acq(p, k, probe, provider, idx)),
                    ("MPEC-ACQ", lambda: check_mpec_acq(p, k, probe, provider, idx)),
                    ("Zangwill", lambda: check_zangwill(p, k, probe, provider, idx)),
                    ("WRC", lambda: check_weak_reverse_convex(p, k, samples, provider, idx))):
        try:
            out[key] = fn().to_dict()
        except MPECError as exc:
            out[key] = {"name": key, "status": "inconclusive", "reason": _error(exc)}
    return out


def _convexity(p, k, provider, flags):
    out = {}
    cfg = SampleConfig(seed=flags.seed)
    try:
        s = provider.get("J")
    except MPECError as exc:
        return {"error": _error(exc)}
    e = p.objective
    try:
        tp = tangential_convexity_probe(e, k, ProbeConfig(seed=flags.seed), s.base_value)
        entry = {"status": tp.status, "samples": tp.samples, "excluded": tp.excluded}
        if tp.witness:
            entry["witness"] = {key: (_vec(v) if isinstance(v, tuple) else _s(v))
                                for key, v in tp.witness.items()}
        out["tangential_convexity"] = entry
    except DomainError as exc:
        out["tangential_convexity"] = {"error": _error(exc)}
    for name, fn in (("pseudoconvex", check_pseudoconvex), ("quasiconvex", check_quasiconvex)):
        try:
            out[name] = fn(e, k, s, cfg, s.base_value).to_dict()
        except DomainError as exc:
            out[name] = {"error": _error(exc)}
    return out


# ---------------------------------------------------------------------------
# pipeline

def run_pipeline(pf: ProblemFile, point, flags: Flags = Flags(), label: str = "") -> dict:
    p = pf.problem
    k = ex.as_point(point)
    report = {
        "tool": {"name": "mpeccert", "version": __version__},
        "settings": {"seed": flags.seed, "kind": flags.kind, "branch_cap": flags.branch_cap,
                     "probe_depth": flags.probe_depth, "zero_tolerance": repr(ZERO_TOL),
                     "sections": list(flags.sections)},
        "problem": {"name": p.name, "dimension": p.n,
                    "functions": {fid: ex.to_infix(e) for fid, e in p.functions()}},
        "point": {"label": label, "coordinates": _vec(k)},
    }
    try:
        feas = check_feasible(p, k)
    except MPECError as exc:
        report["feasibility"] = {"error": _error(exc)}
        return report
    report["feasibility"] = {
        "feasible": feas.feasible,
        "violations": [{"constraint": v.constraint, "residual": _s(v.residual), "rule": v.rule}
                       for v in feas.violations]}
    if not feas:
        return report
    idx = compute_index_sets(p, k)
    report["index_sets"] = {"I_ell": list(idx.I_ell), "Theta": list(idx.theta),
                            "Omega": list(idx.omega), "Upsilon": list(idx.upsilon)}
    provider = SubdifferentialProvider(p, k)
    members = pool_members(idx, p)
    fids = ["J"] + sorted({f for name in ALL_POOLS for f in members[name]})
    report["subdifferentials"] = _subdiff_section(p, provider, fids)
    refs = _reference_section(pf, k, provider, flags.seed)
    if refs:
        report["reference_subdifferentials"] = refs
    try:
        fams = assemble_families(p, k, provider, idx)
        report["families"] = {name: [_vec(v) for v in fams.pools[name]] for name in ALL_POOLS}
        report["cones"] = _cones(fams)
    except MPECError as exc:
        report["families"] = {"error": _error(exc)}
    certs = {}
    if "stationarity" in flags.sections:
        report["stationarity"], certs = _stationarity(p, k, provider, idx, flags)
    if "cq" in flags.sections:
        report["constraint_qualifications"] = _cq(p, k, provider, idx, flags)
    if "convexity" in flags.sections:
        report["convexity"] = _convexity(p, k, provider, flags)
        cert = certs.get("GA")
        if cert is None and "stationarity" in flags.sections and flags.kind != "gs":
            report["sufficiency"] = {"status": "not applicable: no GA certificate"}
        elif cert is not None:
            try:
                v = sufficiency_check(p, k, cert, SampleConfig(seed=flags.seed), provider, idx)
                report["sufficiency"] = v.to_dict()
                if v.failed is not None:
                    report["sufficiency"]["witness"] = {"t": _vec(v.failed.witness_t),
                                                        "xi": _vec(v.failed.witness_xi)}
            except MPECError as exc:
                report["sufficiency"] = {"status": _error(exc)}
    return report


def _cones(fams):
    out = {}
    try:
        pi = build_pi(fams)
        out["Pi"] = {"normals": [_vec(v) for v in pi.normals],
                     "rays": [_vec(r) for r in extreme_rays(pi)]}
    except (AllPoolsEmpty, DimensionTooLarge) as exc:
        out["Pi"] = {"error": _error(exc)}
    try:
        psi = build_psi(fams)
        out["Psi"] = [{"normals": [_vec(v) for v in b.normals],
                       "rays": [_vec(r) for r in extreme_rays(b)]} for b in psi.branches]
    except (AllPoolsEmpty, DimensionTooLarge) as exc:
        out["Psi"] = {"error": _error(exc)}
    out["Delta"] = {"generators": [_vec(v) for v in build_delta(fams).generators]}
    out["Lambda"] = {"generators": [_vec(v) for v in build_lambda(fams).generators]}
    return out


def run_file(pf: ProblemFile, flags: Flags = Flags(), point=None) -> dict:
    """Reports for an explicit point or every labelled point of the file."""
    if point is not None:
        targets = [("cli", ex.as_point(point))]
    else:
        targets = list(pf.points)
    return {"reports": [run_pipeline(pf, pt, flags, label) for label, pt in targets]}


# ---------------------------------------------------------------------------
# emission

def emit(report: dict, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if fmt == "text":
        return ("\n".join(text_lines(report)) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


_GREEK = {"lambda": "λ", "mu": "μ"}


def format_multipliers(cert: dict) -> str:
    parts = []
    for fam, values in cert["multipliers"].items():
        head, tail = fam.split("_", 1)
        label = f"{_GREEK[head]}_{tail}"
        for i, v in values.items():
            if Fraction(v) != 0:
                parts.append(f"{label}={v}" if len(values) == 1 else f"{label}[{i}]={v}")
    return ", ".join(parts) if parts else "all multipliers 0"


def text_lines(doc: dict):
    if "reports" in doc:
        lines = []
        for r in doc["reports"]:
            lines.extend(text_lines(r))
            lines.append("")
        return lines[:-1] if lines else lines
    r = doc
    out = [f"== {r['problem']['name'] or 'problem'} at {r['point']['label'] or 'point'} "
           f"({', '.join(r['point']['coordinates'])}) ==",
           f"tool: {r['tool']['name']} {r['tool']['version']}, seed {r['settings']['seed']}"]
    for fid, s in r["problem"]["functions"].items():
        out.append(f"  {fid}(k) = {s}")
    feas = r.get("feasibility", {})
    if "error" in feas:
        out.append(f"feasibility: {feas['error']}")
        return out
    if not feas["feasible"]:
        out.append("feasible: NO")
        for v in feas["violations"]:
            out.append(f"  violated {v['constraint']} {v['rule']} (value {v['residual']})")
        return out
    out.append("feasible: YES")
    ix = r["index_sets"]
    out.append("index sets: " + ", ".join(f"{k}={{{', '.join(map(str, v))}}}" for k, v in ix.items()))
    for fid, s in r["subdifferentials"].items():
        if "error" in s:
            out.append(f"  subdifferential {fid}: {s['error']}")
        else:
            verts = " ".join("(" + ", ".join(v) + ")" for v in s["vertices"])
            out.append(f"  subdifferential {fid}: conv{{{verts}}} [{s['provenance']}]")
            for w in s.get("warnings", []):
                out.append(f"    warning: {w}")
    for ref in r.get("reference_subdifferentials", []):
        if "error" in ref:
            out.append(f"  listed set for {ref['function']}: {ref['error']}")
            continue
        for v, flag in zip(ref["listed"], ref["flags"]):
            if flag != "vertex":
                out.append(f"  listed point ({', '.join(v)}) of {ref['function']} is {flag}, not a vertex")
        out.append(f"  listed set for {ref['function']}: same hull = {'yes' if ref['same_hull'] else 'no'},"
                   f" support deviation {ref['support_deviation']}")
    cones = r.get("cones")
    if cones:
        pi = cones["Pi"]
        if "rays" in pi:
            out.append("Pi rays: " + (" ".join("(" + ", ".join(v) + ")" for v in pi["rays"]) or "{0}"))
    st = r.get("stationarity", {})
    for kind in ("GS", "GA"):
        if kind not in st:
            continue
        e = st[kind]
        if e["status"] == "YES":
            c = e["certificate"]
            extra = ""
            if c.get("branch"):
                extra = " branch " + ", ".join(f"{i}:{b}" for i, b in c["branch"].items())
            out.append(f"{kind}-stationary: YES ({format_multipliers(c)}){extra}")
            if not c["verified"]:
                out.append("  certificate check FAILED: " + "; ".join(c["verification_issues"]))
        else:
            out.append(f"{kind}-stationary: {e['status']}")
    for name, v in r.get("constraint_qualifications", {}).items():
        line = f"{name}: {v['status']}"
        if "witness" in v:
            line += f" witness ({', '.join(v['witness'])})"
        if v.get("reason"):
            line += f" [{v['reason']}]"
        out.append(line)
        if v["status"] == "refuted":
            for t in v.get("trace", []):
                out.append(f"    {t}")
    conv = r.get("convexity", {})
    if "error" in conv:
        out.append(f"convexity: {conv['error']}")
    for key in ("tangential_convexity", "pseudoconvex", "quasiconvex"):
        if key in conv:
            c = conv[key]
            line = f"J {key.replace('_', ' ')}: {c.get('status', c.get('error'))}"
            if "samples" in c:
                line += f" ({c['samples']} samples)"
            if c.get("status") == "refuted" and "t" in c.get("witness", {}):
                line += f" witness t=({', '.join(c['witness']['t'])}) xi=({', '.join(c['witness']['xi'])})"
            out.append(line)
    if "sufficiency" in r:
        s = r["sufficiency"]
        line = f"sufficiency: {s['status']}"
        if s.get("detail"):
            line += f" ({s['detail']})"
        if "witness" in s:
            line += f" witness t=({', '.join(s['witness']['t'])})"
        out.append(line)
    return out
