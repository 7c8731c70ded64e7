"""Bundled problem files."""

from __future__ import annotations

from importlib import resources

from .problem_io import ProblemFile, parse_problem


def names() -> list:
    files = resources.files("mpeccert").joinpath("data")
    return sorted(f.name[:-5] for f in files.iterdir() if f.name.endswith(".json"))


def path(name: str):
    return resources.files("mpeccert").joinpath("data", name + ".json")


def load(name: str) -> ProblemFile:
    return parse_problem(path(name).read_bytes())


def instances():
    """``(name, label, ProblemFile, point)`` for every feasible labelled point."""
    from .model import check_feasible

    out = []
    for name in names():
        pf = load(name)
        for label, pt in pf.points:
            if check_feasible(pf.problem, pt):
                out.append((name, label, pf, pt))
    return out
