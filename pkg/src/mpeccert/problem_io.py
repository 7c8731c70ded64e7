"""JSON problem files.

A problem file is a single JSON object::

    {
      "format": 1,
      "name": "example",
      "dimension": 2,
      "objective": {"add": [{"abs": {"var": 0}}, {"pow": [{"var": 1}, 3]}]},
      "inequalities": [...], "equalities": [...], "G": [...], "H": [...],
      "manual_subdifferentials": [
        {"function": "J", "point": ["0", "0"], "vertices": [["1", "0"]], "value": "0"}],
      "reference_subdifferentials": [
        {"function": "J", "point": ["0", "0"], "listed": [["1", "0"], ["0", "0"]]}],
      "points": [{"label": "origin", "point": ["0", "0"]}]
    }

Expression nodes are one-key objects: ``const`` (rational string), ``var``
(0-based index), ``add``/``mul``/``max``/``min`` (lists), ``neg``/``abs``/
``exp`` (one child), ``div`` ([num, den]) and ``pow`` ([child, exponent]).
Rationals are strings so they survive the round trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from . import expr as ex
from .errors import ParseError, ValidationError
from .model import ManualEntry, MPECProblem

FORMAT_VERSION = 1
_NARY = ("add", "mul", "max", "min")
_UNARY = ("neg", "abs", "exp")
_KEYS = ("format", "name", "dimension", "objective", "inequalities", "equalities", "G", "H",
         "manual_subdifferentials", "reference_subdifferentials", "points")


@dataclass(frozen=True)
class ReferenceSet:
    """A subdifferential as listed by hand, to be compared with the derived one."""

    function: str
    point: tuple
    listed: tuple


@dataclass(frozen=True)
class ProblemFile:
    problem: MPECProblem
    points: tuple = ()  # (label, point)
    references: tuple = ()

    def point(self, label: str) -> tuple:
        for name, pt in self.points:
            if name == label:
                return pt
        raise ValidationError(f"no point labelled {label!r}", "points")


# ---------------------------------------------------------------------------
# parsing

def _rational(x, path):
    if isinstance(x, bool) or not isinstance(x, (str, int)):
        raise ValidationError("rationals must be strings like \"3/2\" or integers", path)
    try:
        return Fraction(x.strip()) if isinstance(x, str) else Fraction(x)
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"not a rational number: {x!r}", path) from None


def _vector(x, path, n=None):
    if not isinstance(x, list):
        raise ValidationError("expected a list of rationals", path)
    v = tuple(_rational(c, f"{path}[{i}]") for i, c in enumerate(x))
    if n is not None and len(v) != n:
        raise ValidationError(f"expected {n} coordinates, got {len(v)}", path)
    return v


def parse_expr(node, path="expr") -> ex.Expr:
    try:
        return _parse_expr(node, path)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc), path) from None


def _parse_expr(node, path):
    if not isinstance(node, dict) or len(node) != 1:
        raise ValidationError("an expression node is an object with exactly one key", path)
    (op, arg), = node.items()
    sub = f"{path}.{op}"
    if op == "const":
        return ex.const(_rational(arg, sub))
    if op == "var":
        if isinstance(arg, bool) or not isinstance(arg, int) or arg < 0:
            raise ValidationError("variable index must be a nonnegative integer", sub)
        return ex.var(arg)
    if op in _NARY:
        if not isinstance(arg, list) or len(arg) < 2:
            raise ValidationError(f"{op} takes a list of at least two expressions", sub)
        children = [parse_expr(a, f"{sub}[{i}]") for i, a in enumerate(arg)]
        return {"add": ex.add, "mul": ex.mul, "max": ex.max_, "min": ex.min_}[op](*children)
    if op in _UNARY:
        child = parse_expr(arg, sub)
        return {"neg": ex.neg, "abs": ex.abs_, "exp": ex.exp}[op](child)
    if op == "div":
        if not isinstance(arg, list) or len(arg) != 2:
            raise ValidationError("div takes [numerator, denominator]", sub)
        return ex.div(parse_expr(arg[0], f"{sub}[0]"), parse_expr(arg[1], f"{sub}[1]"))
    if op == "pow":
        if not isinstance(arg, list) or len(arg) != 2:
            raise ValidationError("pow takes [base, exponent]", sub)
        n = arg[1]
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ValidationError("exponent must be an integer >= 1", f"{sub}[1]")
        return ex.pow_(parse_expr(arg[0], f"{sub}[0]"), n)
    raise ValidationError(f"unknown expression node {op!r}", path)


def _expr_list(doc, key):
    items = doc.get(key, [])
    if not isinstance(items, list):
        raise ValidationError("expected a list of expressions", key)
    return [parse_expr(e, f"{key}[{i}]") for i, e in enumerate(items)]


def problem_from_dict(doc) -> ProblemFile:
    if not isinstance(doc, dict):
        raise ValidationError("top level must be an object")
    unknown = sorted(set(doc) - set(_KEYS))
    if unknown:
        raise ValidationError(f"unknown keys {unknown}")
    if doc.get("format") != FORMAT_VERSION:
        raise ValidationError(f"unsupported format {doc.get('format')!r}, expected {FORMAT_VERSION}",
                              "format")
    n = doc.get("dimension")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValidationError("dimension must be a positive integer", "dimension")
    if "objective" not in doc:
        raise ValidationError("missing objective", "objective")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ValidationError("name must be a string", "name")
    manual = []
    for i, m in enumerate(doc.get("manual_subdifferentials", [])):
        path = f"manual_subdifferentials[{i}]"
        if not isinstance(m, dict) or not {"function", "point", "vertices"} <= set(m):
            raise ValidationError("needs function, point and vertices", path)
        if not isinstance(m["vertices"], list) or not m["vertices"]:
            raise ValidationError("vertices must be a nonempty list", f"{path}.vertices")
        manual.append(ManualEntry(
            m["function"], _vector(m["point"], f"{path}.point", n),
            tuple(_vector(v, f"{path}.vertices[{j}]", n) for j, v in enumerate(m["vertices"])),
            None if m.get("value") is None else _rational(m["value"], f"{path}.value")))
    problem = MPECProblem(
        n, parse_expr(doc["objective"], "objective"),
        ineq=_expr_list(doc, "inequalities"), eq=_expr_list(doc, "equalities"),
        G=_expr_list(doc, "G"), H=_expr_list(doc, "H"), manual=manual, name=name)
    refs = []
    for i, r in enumerate(doc.get("reference_subdifferentials", [])):
        path = f"reference_subdifferentials[{i}]"
        if not isinstance(r, dict) or not {"function", "point", "listed"} <= set(r):
            raise ValidationError("needs function, point and listed", path)
        problem.function(r["function"])
        refs.append(ReferenceSet(r["function"], _vector(r["point"], f"{path}.point", n),
                                 tuple(_vector(v, f"{path}.listed[{j}]", n)
                                       for j, v in enumerate(r["listed"]))))
    points, seen = [], set()
    for i, pt in enumerate(doc.get("points", [])):
        path = f"points[{i}]"
        if not isinstance(pt, dict) or not {"label", "point"} <= set(pt):
            raise ValidationError("needs label and point", path)
        if pt["label"] in seen:
            raise ValidationError(f"duplicate label {pt['label']!r}", path)
        seen.add(pt["label"])
        points.append((pt["label"], _vector(pt["point"], f"{path}.point", n)))
    return ProblemFile(problem, tuple(points), tuple(refs))


def parse_problem(data) -> ProblemFile:
    """Parse problem-file text (str or bytes)."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc.reason}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return problem_from_dict(doc)


def load_problem(path) -> ProblemFile:
    with open(path, "rb") as fh:
        return parse_problem(fh.read())


# ---------------------------------------------------------------------------
# serialization

def expr_to_json(e: ex.Expr):
    op = e.op
    if op == "const":
        return {"const": str(e.value)}
    if op == "var":
        return {"var": e.value}
    if op in _NARY:
        return {op: [expr_to_json(a) for a in e.args]}
    if op in _UNARY:
        return {op: expr_to_json(e.args[0])}
    if op == "div":
        return {"div": [expr_to_json(a) for a in e.args]}
    if op == "pow":
        return {"pow": [expr_to_json(e.args[0]), e.value]}
    raise AssertionError(op)


def _vec(v):
    return [str(c) for c in v]


def problem_to_dict(pf: ProblemFile) -> dict:
    p = pf.problem
    doc = {"format": FORMAT_VERSION, "name": p.name, "dimension": p.n,
           "objective": expr_to_json(p.objective),
           "inequalities": [expr_to_json(e) for e in p.ineq],
           "equalities": [expr_to_json(e) for e in p.eq],
           "G": [expr_to_json(e) for e in p.G], "H": [expr_to_json(e) for e in p.H]}
    if p.manual:
        doc["manual_subdifferentials"] = [
            {"function": m.function, "point": _vec(m.point),
             "vertices": [_vec(v) for v in m.vertices],
             **({} if m.value is None else {"value": str(m.value)})}
            for m in p.manual]
    if pf.references:
        doc["reference_subdifferentials"] = [
            {"function": r.function, "point": _vec(r.point), "listed": [_vec(v) for v in r.listed]}
            for r in pf.references]
    if pf.points:
        doc["points"] = [{"label": lab, "point": _vec(pt)} for lab, pt in pf.points]
    return doc


def serialize_problem(pf: ProblemFile) -> str:
    return json.dumps(problem_to_dict(pf), indent=2) + "\n"
