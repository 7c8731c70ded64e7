from fractions import Fraction

import pytest

from mpeccert import corpus
from mpeccert import expr as ex
from mpeccert.cones import HalfspaceCone
from mpeccert.cq import (TangentProbeConfig, check_gs_acq, check_mpec_acq,
                         check_weak_reverse_convex, check_zangwill, cone_in_union,
                         continuity_probe, polyhedral_pieces, tangent_cone_member, wrc_inventory)
from mpeccert.model import MPECProblem, compute_index_sets

F = Fraction
O = (F(0), F(0))
k1, k2 = ex.variables(2)


@pytest.fixture(scope="module")
def ex4():
    return corpus.load("example4").problem


@pytest.mark.parametrize("d, verdict", [((1, 0), "member"), ((0, 1), "non-member"),
                                        ((0, 0), "member"), ((-1, 0), "non-member"),
                                        ((3, 0), "member")])
def test_tangent_probe_example4(ex4, d, verdict):
    assert tangent_cone_member(ex4, O, d).verdict == verdict


def test_probe_config():
    cfg = TangentProbeConfig()
    assert len(cfg.steps()) == 20 and cfg.steps()[0] == 0.5
    assert cfg.radius(0.5) == 0.25 and cfg.radius(2.0 ** -10) == 10 * 2.0 ** -20
    assert cfg.tolerance(2.0 ** -20) == 1e-14
    with pytest.raises(ValueError):
        TangentProbeConfig(depth=3)


def test_ball_tangent_cone_is_zero():
    p = corpus.load("ball").problem
    assert tangent_cone_member(p, O, (1, 0)).verdict == "non-member"


def test_example4_verdicts(ex4):
    assert check_gs_acq(ex4, O).status == "holds-exact"
    assert check_mpec_acq(ex4, O).status == "holds-exact"
    assert check_zangwill(ex4, O).status == "holds-exact"
    wrc = check_weak_reverse_convex(ex4, O)
    assert wrc.refuted and wrc.witness == (0, 1)


def test_gs_acq_refuted_on_complementarity_corner():
    p = corpus.load("affine_pair").problem
    v = check_gs_acq(p, O)
    assert v.refuted and v.witness is not None
    assert check_mpec_acq(p, O).holds


def test_curved_instance_uses_probe():
    pf = corpus.load("curved")
    k = pf.points[0][1]
    v = check_gs_acq(pf.problem, k)
    assert v.refuted and v.probe_depth == 20 and v.trace


def test_blocked_rule_gives_inconclusive():
    q = MPECProblem(2, k1, ineq=[-abs(k1) - abs(k2)])
    v = check_gs_acq(q, O)
    assert v.status == "inconclusive" and v.reason.startswith("blocked")


def test_all_pools_empty_is_undefined():
    p = MPECProblem(2, k1, ineq=[k1 - 1])
    assert check_gs_acq(p, O).status == "undefined"


def test_polyhedral_pieces_and_union(ex4):
    pieces = polyhedral_pieces(ex4, O, compute_index_sets(ex4, O))
    assert pieces
    ray_x = HalfspaceCone(((0, 1), (0, -1), (-1, 0)), 2)
    assert cone_in_union(ray_x, pieces) == (True, None)
    ray_y = HalfspaceCone(((1, 0), (-1, 0), (0, -1)), 2)
    inside, d = cone_in_union(ray_y, pieces)
    assert not inside and d == (0, 1)


def test_wrc_inventory_and_continuity(ex4):
    inv = wrc_inventory(ex4, compute_index_sets(ex4, O))
    assert inv == [("ell1", "pseudoconcave"), ("G1", "pseudoaffine"), ("H1", "pseudoaffine")]
    assert continuity_probe(abs(k1), O)[0]
    ok, why = continuity_probe(ex.const(1) / k1, (1, 0))
    assert ok
    p = MPECProblem(2, k1)
    assert check_weak_reverse_convex(p, O).status == "holds-exact"
