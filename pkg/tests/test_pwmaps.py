from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from rmatch.exemplars import cf_system
from rmatch.pwmaps import Affine, DomainError, PiecewiseMap, affine_branch
from rmatch.sbfamily import doubling_maps

alphas = st.fractions(min_value=1, max_value=2, max_denominator=50)
points = st.fractions(min_value=-1, max_value=1, max_denominator=200)


def test_one_sided_limits_at_half():
    a = F(7, 5)
    t0, _ = doubling_maps(a)
    assert t0.eval(F(1, 2), "left_limit") == 1
    assert t0.eval(F(1, 2), "right_limit") == 1 - a


def test_zero_is_fixed():
    for t in doubling_maps(F(13, 10)):
        assert t.eval(F(0)) == 0


def test_doubling_slope():
    for t in doubling_maps(F(13, 10)):
        for x in (F(-1), F(-1, 3), F(0), F(2, 3), F(1)):
            assert t.deriv(x) == 2


def test_cf_derivatives():
    a = F(7, 10)
    system = cf_system(a)
    t0, t1 = system.maps
    assert t1.deriv(a) == -1 / a ** 2
    x = F(-1, 5)
    assert t0.deriv(x) == 1 / x ** 2


def test_preimages_examples():
    t0, _ = doubling_maps(F(3, 2))
    assert sorted(t0.preimages(F(0))) == [(F(-3, 4), 0), (F(0), 1), (F(3, 4), 2)]
    assert t0.preimages(F(3)) == []
    t0, t1 = doubling_maps(F(1))
    assert sorted(x for x, _ in t0.preimages(F(1))) == [F(0), F(1, 2), F(1)]


def test_eval_outside_domain_errors():
    t0, _ = doubling_maps(F(7, 5))
    with pytest.raises(DomainError):
        t0.eval(F(2))
    with pytest.raises(DomainError):
        t0.eval(F(-1), "left")


def test_overlapping_branches_rejected():
    with pytest.raises(ValueError):
        PiecewiseMap([0, 1], [affine_branch(0, F(1, 2), True, True, 2, 0),
                              affine_branch(F(1, 2), 1, True, True, 2, -1)])


@given(alphas, points)
def test_eval_matches_oracle(a, x):
    t0, t1 = doubling_maps(a)
    assert t0.eval(x) == oracles.t0(a, x)
    assert t1.eval(x) == oracles.t1(a, x)


@given(alphas, points)
def test_owner_agrees_with_a_one_sided_limit(a, x):
    for t in doubling_maps(a):
        if -1 < x < 1:
            v = t.eval(x)
            assert v in (t.eval(x, "left"), t.eval(x, "right"))


@given(alphas, points)
def test_preimages_complete_and_exact(a, y):
    maps = doubling_maps(a)
    for t, ref in zip(maps, (oracles.t0, oracles.t1)):
        got = {x for x, _ in t.preimages(y)}
        assert all(t.eval(x) == y for x in got)
        candidates = {(y - d) / 2 for d in (a, F(0), -a)}
        expected = {x for x in candidates if -1 <= x <= 1 and ref(a, x) == y}
        assert got == expected


@given(alphas, points, points)
def test_monotone_within_branch(a, x, y):
    for t in doubling_maps(a):
        if x < y and t.branch_index(x) == t.branch_index(y):
            assert t.eval(x) < t.eval(y)


def test_json_roundtrip():
    t0, _ = doubling_maps(F(7, 5))
    back = PiecewiseMap.from_json(t0.to_json())
    for x in (F(-1), F(-1, 5), F(1, 2), F(3, 4), F(1)):
        assert back.eval(x) == t0.eval(x)
    assert Affine(F(2), F(1)).derivative(F(0)) == 2
