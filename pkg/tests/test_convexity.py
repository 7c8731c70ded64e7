from fractions import Fraction

from mpeccert import corpus
from mpeccert import expr as ex
from mpeccert.convexity import (SampleConfig, check_pseudoaffine, check_pseudoconcave,
                                check_pseudoconvex, check_quasiconvex, mu_index_sets,
                                negated_subdifferential, region_label, sufficiency_check,
                                sufficiency_hypotheses, trial_points)
from mpeccert.model import compute_index_sets
from mpeccert.stationarity import check_ga_stationary
from mpeccert.tangential import build_subdifferential

F = Fraction
O = (F(0), F(0))
k1, k2 = ex.variables(2)
SMALL = SampleConfig(samples=500)


def _dot(a, b):
    return sum((x * y for x, y in zip(a, b)), F(0))


def test_trial_points_are_deterministic_and_in_ball():
    exact, floats = trial_points(O, SMALL)
    again = trial_points(O, SMALL)
    assert exact == again[0] and (floats == again[1]).all()
    assert floats.shape == (500, 2) and (floats ** 2).sum(axis=1).max() <= 4
    assert (1, 0) in exact and all(sum(c * c for c in t) <= 4 for t in exact)
    assert region_label(SMALL).startswith("ball radius 2")


def test_pseudoconvex_witness_is_genuine():
    e = abs(k1) + k2 ** 3
    s = build_subdifferential(e, O)
    v = check_pseudoconvex(e, O, s, SMALL)
    assert v.refuted
    t, xi = v.witness_t, v.witness_xi
    assert xi in s.vertices
    assert _dot(xi, t) >= 0 and ex.evaluate(e, t) < ex.evaluate(e, O)


def test_convex_functions_pass():
    for e in (abs(k1) + k2 ** 2, ex.max_(k1, k2), k1 + 2 * k2):
        s = build_subdifferential(e, O)
        assert check_pseudoconvex(e, O, s, SMALL).status == "no-violation"
        assert check_quasiconvex(e, O, s, SMALL).status == "no-violation"


def test_quasiconvex_witness():
    e = -(k1 ** 2)
    k = (F(1), F(0))
    v = check_quasiconvex(e, k, build_subdifferential(e, k), SMALL)
    assert v.refuted
    t = v.witness_t
    assert ex.evaluate(e, t) <= ex.evaluate(e, k)
    assert _dot(v.witness_xi, (t[0] - 1, t[1])) > 0


def test_concavity_and_negation_fallback():
    s, note = negated_subdifferential(abs(k1), O)
    assert set(s.vertices) == {(1, 0), (-1, 0)} and "unavailable" in note
    assert check_pseudoconcave(-abs(k1), O, SMALL).status == "no-violation"
    assert check_pseudoconcave(abs(k2), O, SMALL).refuted
    assert check_pseudoaffine(k1 - k2, O, SMALL).status == "no-violation"
    v = check_pseudoaffine(k1 ** 2, (F(1, 2), 0), SMALL)
    assert v.refuted and v.to_dict()["witness"]


def test_sufficiency_statuses():
    good = corpus.load("example4_square").problem
    cert = check_ga_stationary(good, O)
    assert sufficiency_check(good, O, cert, SMALL).status == "global-min-certified"
    bad = corpus.load("example4").problem
    v = sufficiency_check(bad, O, check_ga_stationary(bad, O), SMALL)
    assert v.status == "hypothesis-failed" and v.detail == "J pseudoconvex"
    idx = compute_index_sets(bad, O)
    assert sufficiency_hypotheses(bad, idx) == [("J", "pseudoconvex"), ("ell1", "quasiconvex"),
                                               ("-G1", "quasiconvex"), ("-H1", "quasiconvex")]


def test_mu_index_sets_block_sufficiency():
    pf = corpus.load("ga_only")
    p, k = pf.problem, pf.points[0][1]
    cert = check_ga_stationary(p, k)
    mu = mu_index_sets(cert, compute_index_sets(p, k))
    assert mu.omega_G == (1,) and mu.first_nonempty() == "omega_G"
    v = sufficiency_check(p, k, cert, SMALL)
    assert v.status == "index-sets-nonempty" and v.detail == "omega_G"
