from fractions import Fraction

import pytest

from mpeccert import expr as ex
from mpeccert.errors import AllPoolsEmpty, FeasibilityError, RuleFailure, ValidationError
from mpeccert.model import (ManualEntry, MPECProblem, SubdifferentialProvider, assemble_families,
                            build_delta, build_lambda, build_pi, build_psi, check_feasible,
                            compute_index_sets)

F = Fraction
k1, k2 = ex.variables(2)
EX4 = MPECProblem(2, abs(k1) + k2 ** 3, ineq=[abs(k2)], G=[k1], H=[k2])


def test_feasibility():
    assert check_feasible(EX4, (0, 0))
    res = check_feasible(EX4, (1, 1))
    assert not res and {v.constraint for v in res.violations} == {"ell1", "GtH"}
    assert check_feasible(EX4, (5, 0))
    assert not check_feasible(EX4, (-1, 0))


def test_index_sets():
    idx = compute_index_sets(EX4, (0, 0))
    assert (idx.I_ell, idx.theta, idx.omega, idx.upsilon) == ((1,), (), (1,), ())
    idx = compute_index_sets(EX4, (5, 0))
    assert idx.upsilon == (1,) and idx.classify(1) == "upsilon"
    with pytest.raises(FeasibilityError):
        compute_index_sets(EX4, (1, 1))


def test_families_and_cones():
    fams = assemble_families(EX4, (0, 0))
    assert set(fams.pools["ell"]) == {(0, 1), (0, -1)}
    assert fams.pools["GH_Omega"] == ((-1, 0), (0, -1))
    assert fams.pools["G_Omega"] == ((1, 0),) and fams.pools["H_Omega"] == ((0, 1),)
    pi = build_pi(fams)
    assert pi.contains((1, 0)) and not pi.contains((0, 1)) and not pi.contains((-1, 0))
    psi = build_psi(fams)
    assert not psi.branch_G.contains((1, 0)) and psi.branch_H.contains((1, 0))
    assert build_delta(fams).contains((0, 5)) and not build_delta(fams).contains((1, 0))
    assert build_lambda(fams).contains((1, 0))


def test_all_pools_empty():
    p = MPECProblem(2, k1, ineq=[k1 - 1])
    with pytest.raises(AllPoolsEmpty):
        build_pi(assemble_families(p, (0, 0)))


def test_validation():
    with pytest.raises(ValidationError):
        MPECProblem(2, k1, G=[k1, k2], H=[k2])
    with pytest.raises(ValidationError):
        MPECProblem(1, k2)
    with pytest.raises(ValidationError):
        MPECProblem(2, k1, manual=[ManualEntry("ell3", (0, 0), [(1, 0)])])
    with pytest.raises(ValidationError):
        EX4.function("G2")


def test_manual_value_and_provider():
    ex1 = k1 ** 3 / k2 + k1
    p = MPECProblem(2, ex1, manual=[ManualEntry("J", (0, 0), [(1, 0)], 0)])
    assert p.value("J", (0, 0)) == 0
    s = SubdifferentialProvider(p, (0, 0)).get("J")
    assert s.provenance == "manual" and s.base_value == 0
    bare = MPECProblem(2, ex1)
    with pytest.raises(RuleFailure) as info:
        SubdifferentialProvider(bare, (0, 0)).get("J")
    assert info.value.function == "J"


def test_negated_ids():
    assert ex.evaluate(EX4.function("-G1"), (3, 0)) == -3
