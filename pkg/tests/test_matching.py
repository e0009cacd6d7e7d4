from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from rmatch.exemplars import (BETA, beta_system, cf_alternative_certificate, cf_m3_certificate,
                              cf_system)
from rmatch.matching import (CoverageError, MatchingCertificate, NoMatchingWithinDepth, OrbitTree,
                             alternative_stopping, find_matching, pattern_cover_ok,
                             strong_certificate_exists, verify_strong)
from rmatch.randsys import RandomSystem
from rmatch.sbfamily import m_alpha, make_system, s_map, s_orbit

HALF = F(1, 2)


def matching_alphas(lo=F(1), hi=F(3, 2), max_den=60, max_m=8):
    return st.fractions(min_value=lo, max_value=hi, max_denominator=max_den).filter(
        lambda a: lo < a < hi and isinstance(m := m_alpha(a), int) and m <= max_m)


def test_tree_upper_regime():
    a = F(8, 5)
    tree = OrbitTree(make_system(a), HALF, 1, 2)
    for j in (0, 1):
        assert tree.node((j,))[0] == 1 - a
        for k in (0, 1):
            assert tree.node((j, k))[0] == 2 - a


def test_tree_lower_regime():
    a = F(13, 10)
    assert OrbitTree(make_system(a), HALF, 1, 1).node((1,))[0] == 1 - a


def test_tree_beta():
    a = F(29, 20)
    tree = OrbitTree(beta_system(a, F(1, 3)), F(1), -1, 2)
    assert tree.node((0,))[0] == BETA
    for j in (0, 1):
        assert tree.node((0, j))[0] == BETA ** 2 - a


def test_find_matching_seven_fifths():
    cert = find_matching(make_system(F(7, 5)), HALF)
    assert isinstance(cert, MatchingCertificate)
    assert cert.M == 3 and cert.Y == (F(-1, 5),) and cert.strong


def test_find_matching_markov_point():
    res = find_matching(make_system(F(6, 5)), HALF)
    assert isinstance(res, NoMatchingWithinDepth)
    assert set(m_alpha(F(6, 5)).cycle) == {F(4, 5), F(2, 5)}


def test_three_halves_endpoint_has_no_certificate_under_strict_limits():
    # S(1) = 1/2 is itself critical and S(1/2) = 1: the strict convention gives no M_alpha
    res = find_matching(make_system(F(3, 2)), HALF)
    assert isinstance(res, NoMatchingWithinDepth)


def test_verify_strong_beta():
    p0 = F(1, 3)
    system = beta_system(F(29, 20), p0)
    cert = verify_strong(system, find_matching(system, 1 / BETA, M_max=7))
    assert cert.M == 7 and cert.strong
    ya = BETA ** 5 * (BETA - F(29, 20)) - F(29, 20)
    assert cert.balance[ya] == (p0 / BETA ** 7, p0 / BETA ** 7)


def test_verify_strong_doubling():
    system = make_system(F(13, 10), F(1, 3))
    cert = verify_strong(system, find_matching(system, HALF))
    (a, b), = cert.balance.values()
    assert cert.strong and a == b


def test_cf_m3_not_strong():
    a, p0 = F(73, 125), F(3, 10)
    cert, _ = cf_m3_certificate(a, p0)
    cert = verify_strong(cf_system(a, p0), cert)
    assert not cert.strong


def test_alternative_beta_strong():
    a = F(29, 20)
    system = beta_system(a, F(1, 3))
    cert = find_matching(system, F(1), M_max=3)
    y1, y2 = BETA - a, BETA ** 2 * (BETA - a)
    pats = {y1: ["1"], y2: ["0**"]}
    alt = alternative_stopping(system, cert, [y1, y2], M=3, stops={"minus": pats, "plus": pats})
    assert alt.strong


def test_alternative_cf_strong():
    assert cf_alternative_certificate(F(7, 10), F(3, 10)).strong


def test_alternative_missing_ray():
    system = make_system(F(7, 5))
    cert = find_matching(system, HALF)
    with pytest.raises(CoverageError):
        alternative_stopping(system, cert, [F(1, 5)], M=3)


def test_pattern_cover():
    assert pattern_cover_ok(["0*", "1"], 2)
    assert not pattern_cover_ok(["00", "1"], 2)


def _stop_mass(system, patterns):
    total = F(0)
    for pats in patterns.values():
        for pat in pats:
            w = F(1)
            for ch in pat:
                if ch != "*":
                    w *= system.probs[int(ch)]
            total += w
    return total


@settings(max_examples=25)
@given(matching_alphas(), st.sampled_from([F(1, 4), F(1, 3), F(1, 2), F(2, 3)]))
def test_stop_words_cover_unit_mass(a, p):
    system = make_system(a, p)
    for c in system.critical_set:
        cert = find_matching(system, c)
        assert _stop_mass(system, cert.stops_minus) == 1
        assert _stop_mass(system, cert.stops_plus) == 1


def _limit_step(a, j, c, side):
    """T_j(c^side) written out from the explicit branch formulas."""
    lo_mid, hi_mid = ((1 - a) / 2, HALF) if j == 0 else (-HALF, (a - 1) / 2)
    x_is_left_of = lambda bound: c < bound or (c == bound and side < 0)
    if x_is_left_of(lo_mid) or (j == 1 and c == lo_mid and side < 0):
        return 2 * c + a
    if x_is_left_of(hi_mid) or (c == hi_mid and side < 0):
        return 2 * c
    return 2 * c - a


@settings(max_examples=20)
@given(matching_alphas(max_m=6), st.lists(st.integers(0, 1), min_size=1, max_size=6), st.sampled_from([-1, 1]))
def test_tree_consistency(a, word, side):
    system = make_system(a)
    tree = OrbitTree(system, HALF, side, len(word))
    try:
        got, deriv, weight = tree.node(word)
    except Exception:
        return
    y = _limit_step(a, word[0], HALF, side)
    for j in word[1:]:
        y = (oracles.t0, oracles.t1)[j](a, y)
    assert got == y
    assert deriv == 2 ** len(word)
    assert weight == system.word_weight(word) / 2 ** len(word)


@settings(max_examples=15)
@given(matching_alphas(max_m=10))
def test_deterministic_reduction(a):
    single = RandomSystem([s_map(a)], [1])
    cert = find_matching(single, HALF)
    assert cert.M == m_alpha(a) + 1
    (lm, rp), = cert.balance.values()
    assert lm == rp


@settings(max_examples=15)
@given(matching_alphas(max_m=6))
def test_doubling_strong_matching_exponent(a):
    system = make_system(a, F(1, 3))
    M = m_alpha(a)
    target = s_orbit(a, M)[M]
    assert target == oracles.s_orbit(a, M)[M]
    cert = find_matching(system, HALF)
    assert cert.M == M + 1 and cert.Y == (target,) and cert.strong
    for K in range(1, M + 1):
        assert not strong_certificate_exists(system, HALF, K)[0]


def test_certificate_json_roundtrip():
    cert = find_matching(make_system(F(7, 5)), HALF)
    back = MatchingCertificate.from_json(cert.to_text())
    assert back.M == cert.M and back.Y == cert.Y and back.balance == cert.balance
