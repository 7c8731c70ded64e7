from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from mpeccert.cones import (GeneratedCone, HalfspaceCone, VertexPolytope, cone_member, cone_subset,
                            convex_weights, extreme_rays, find_point, lp_feasible, minkowski_sum,
                            polar, primitive, prune_to_vertices)
from mpeccert.errors import DimensionMismatch, DimensionTooLarge

F = Fraction


def test_extreme_rays_examples():
    assert extreme_rays(HalfspaceCone(((0, 1), (0, -1), (-1, 0)), 2)) == ((1, 0),)
    assert set(extreme_rays(HalfspaceCone((), 2))) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert set(extreme_rays(HalfspaceCone(((1, 0), (-1, 0)), 2))) == {(0, 1), (0, -1)}
    assert extreme_rays(HalfspaceCone(((1, 0), (-1, 0), (0, 1), (0, -1)), 2)) == ()


def test_extreme_rays_dimension_cap():
    with pytest.raises(DimensionTooLarge):
        extreme_rays(HalfspaceCone((), 9))


def test_minkowski_and_pruning():
    sq = minkowski_sum(VertexPolytope(((1, 0), (-1, 0))), VertexPolytope(((0, 1), (0, -1))))
    assert set(sq.vertices) == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
    assert prune_to_vertices([(1, 0), (0, 0), (-1, 0)]) == ((1, 0), (-1, 0))


def test_membership_helpers():
    assert convex_weights([(1, 0), (-1, 0)], (0, 0)) == (F(1, 2), F(1, 2))
    assert convex_weights([(1, 0), (-1, 0)], (0, 1)) is None
    ok, w = cone_member(GeneratedCone(((1, 0), (0, 1)), 2), (2, 3))
    assert ok and w == (2, 3)
    assert not GeneratedCone(((1, 0),), 2).contains((-1, 0))
    assert cone_subset(GeneratedCone(((1, 0),), 2), polar([(-1, 0)], 2)) == (True, None)
    assert primitive((F(2, 3), F(4, 3))) == (1, 2)


def test_find_point_and_dimension_errors():
    d = find_point(2, le=[((1, 0), 0), ((-1, -1), -1)])
    assert d is not None and d[0] <= 0 and -d[0] - d[1] <= -1
    assert find_point(1, le=[((1,), -1), ((-1,), -1)]) is None
    with pytest.raises(DimensionMismatch):
        HalfspaceCone(((1, 0), (1,)), 2)


def test_lp_certificate_reproduces_system():
    cert = lp_feasible([(1, 2, 0), (0, 1, 1)], [F(3, 2), 3], convex_groups=[[0, 1]])
    assert cert.feasible
    x = cert.x
    assert x[0] + 2 * x[1] == F(3, 2) and x[1] + x[2] == 3 and x[0] + x[1] == 1
    # convex weights plus an equality that contradicts them
    assert not lp_feasible([(1, 1, 0)], [2], convex_groups=[[0, 1]], n_vars=3)
    assert not lp_feasible([(1, 1)], [-1])


small = st.integers(-3, 3).map(F)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.lists(small, min_size=n, max_size=n), min_size=1, max_size=5),
    st.lists(small, min_size=5, max_size=5))))
def test_lp_agrees_with_fourier_motzkin(data):
    n, A, b = data
    b = b[:len(A)]
    cert = lp_feasible(A, b, n_vars=n)
    assert cert.feasible == oracles.lp_system_feasible(A, b, None, (), n)
    if cert.feasible:
        assert all(sum((a * x for a, x in zip(row, cert.x)), F(0)) == bi for row, bi in zip(A, b))


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 3).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.lists(small, min_size=n, max_size=n), max_size=4),
    st.lists(small, min_size=n, max_size=n))))
def test_extreme_rays_generate_the_cone(data):
    n, normals, point = data
    h = HalfspaceCone(tuple(normals), n)
    rays = extreme_rays(h)
    for r in rays:
        assert h.contains(r)
    # a point of h is a nonnegative combination of the rays, and vice versa
    if h.contains(point):
        assert GeneratedCone(rays, n).contains(point)
    elif rays:
        assert not GeneratedCone(rays, n).contains(point)
