from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sympy

from rmatch.exactnum import QuadExt, qsqrt, sign, to_float
from rmatch.exemplars import (BETA, BetaParams, beta_certificates, beta_density, beta_orbit_nodes,
                              beta_system, cf_alternative_certificate, cf_certificates,
                              cf_m3_certificate, cf_negative_certificate, cf_orbit_nodes_m3,
                              cf_orbit_nodes_m4, cf_pre_matching_points, cf_system, check_nodes,
                              find_jn, i_nk, in_m3_regime, jn_interval, no_strong_below,
                              positive_critical)

A7 = F(7, 10)
A73 = F(73, 125)
G = (qsqrt(5) - 1) / 2


def sym(x):
    if isinstance(x, QuadExt):
        return sympy.Rational(str(x.a)) + sympy.Rational(str(x.b)) * sympy.sqrt(x.d)
    return sympy.Rational(str(x))


def sym_less(x, y) -> bool:
    # exact comparison across different quadratic fields
    return bool(sympy.simplify(sym(y) - sym(x)) > 0)


def cf_roots(a):
    return {"alpha": (a, -1), "alpha-1": (a - 1, 1)}


def test_maps_coincide_on_positive_side():
    t0, t1 = cf_system(A7).maps
    for i in range(1, 200):
        x = A7 * F(i, 200)
        if not t0.is_critical(x):
            assert t0.eval(x) == t1.eval(x)


def test_negative_critical_images():
    a = A7
    t0, t1 = cf_system(a).maps
    for n in (3, 4, 5):
        c = -1 / (a + n)
        if not a - 1 < c:
            continue
        assert t0.eval(c, "left") == a and t0.eval(c, "right") == a - 1
    for n in (5, 6):
        c = 1 / (a - n)
        assert {t1.eval(c, "left"), t1.eval(c, "right")} <= {1 - a, a, a - 1}


def test_positive_critical_images():
    a = A7
    system = cf_system(a)
    for order in range(3):
        c = positive_critical(a, order)
        for t in system.maps:
            assert {t.eval(c, "left"), t.eval(c, "right")} <= {a - 1, a}


def test_positive_critical_inside_domain():
    assert positive_critical(A7) == 1 / (A7 + 1)
    assert positive_critical(A73) == 1 / (A73 + 2)


def test_jn_endpoints():
    l4, r4 = jn_interval(4)
    assert l4 == (5 - qsqrt(13)) / 2 and r4 == qsqrt(F(1, 2))
    prev = None
    for n in range(4, 13):
        l, r = jn_interval(n)
        assert sym_less(G, l) and sym_less(l, r) and sym_less(r, 1)
        if prev is not None:
            assert sym_less(prev[0], l) and sym_less(prev[1], r)
        prev = (l, r)
    assert find_jn(A7) == (4, 3)


@pytest.mark.parametrize("n", range(4, 9))
def test_jn_covered_by_ink_cells(n):
    l, r = jn_interval(n)
    lo, hi = to_float(l), to_float(r)
    for i in range(1, 8):
        a = F(round((lo + (hi - lo) * i / 8) * 10 ** 6), 10 ** 6)
        loc = find_jn(a)
        assert loc is not None and loc[0] == n and 2 <= loc[1] <= n - 1
        k = loc[1]
        assert sign(a - i_nk(n, k + 1)) > 0 and sign(i_nk(n, k) - a) >= 0


def test_fig4_nodes():
    for p0 in (F(3, 10), F(1, 2)):
        assert check_nodes(cf_system(A7, p0), cf_roots(A7), cf_orbit_nodes_m4(A7, 4, 3)) == []


def test_fig2_nodes():
    assert in_m3_regime(A73)
    assert check_nodes(cf_system(A73, F(3, 10)), cf_roots(A73), cf_orbit_nodes_m3(A73)) == []


@pytest.mark.parametrize("p0", [F(3, 10), F(1, 2)])
def test_m4_certificate_strong(p0):
    rep, = cf_certificates(A7, p0)
    cert = rep.certificate
    assert cert.M == 4 and cert.strong and cert.Y == (F(0),)
    c = rep.c
    assert cert.balance[F(0)] == (c * c * (3 * A7 - 2) ** 2,) * 2


@pytest.mark.parametrize("p0", [F(3, 10), F(1, 2)])
def test_m3_certificate_not_strong(p0):
    cert, pred = cf_m3_certificate(A73, p0)
    assert not cert.strong
    p1 = 1 - p0
    c = positive_critical(A73)
    K = (4 - 7 * A73) / (1 - 2 * A73)
    sums = cert.balance[K]
    expected = {-p1 ** 2 * c * c * (2 * A73 - 1) ** 2, -p1 * c * c * (2 * A73 - 1) ** 2}
    assert set(sums) == expected


def test_no_strong_below_four_at_seven_tenths():
    assert no_strong_below(A7, F(3, 10), positive_critical(A7), 3)


def test_alternative_certificate():
    for p0 in (F(3, 10), F(1, 2)):
        assert cf_alternative_certificate(A7, p0).strong


@pytest.mark.parametrize("c", [-1 / (A7 + 3), -1 / (A7 + 4), 1 / (A7 - 5), 1 / (A7 - 6)])
def test_negative_certificates(c):
    p0 = F(3, 10)
    system = cf_system(A7, p0)
    cert = cf_negative_certificate(A7, p0, c)
    assert cert.strong
    # only one map jumps at a negative critical point, so its probability weights the sum
    pj = p0 if system.maps[0].is_critical(c) else 1 - p0
    for a, b in cert.balance.values():
        assert a == b
    assert abs(cert.balance[F(0)][0]) == pj * c * c * (3 * A7 - 2) ** 2


@settings(max_examples=6)
@given(st.integers(1, 7))
def test_m4_certificates_across_cell(i):
    # three or more rationals per (i_{4,3}, i_{4,2}] cell of J_4
    l, r = jn_interval(4)
    lo = max(to_float(l), to_float(i_nk(4, 3)))
    hi = min(to_float(r), to_float(i_nk(4, 2)))
    a = F(round((lo + (hi - lo) * i / 8) * 10 ** 5), 10 ** 5)
    assert find_jn(a) == (4, 2) or find_jn(a) == (4, 3)
    rep, = cf_certificates(a, F(2, 5))
    assert rep.certificate.M == 4 and rep.certificate.strong
    assert rep.certificate.Y == rep.predicted_Y


def test_pre_matching_points():
    pts = cf_pre_matching_points(A7, 4, 3)
    assert len(pts) == 4 and all(A7 - 1 < p < A7 for p in pts)


def test_beta_membership():
    BetaParams(F(29, 20))
    with pytest.raises(ValueError):
        BetaParams(F(3, 2))


@pytest.mark.parametrize("p0", [F(1, 3), F(1, 2)])
def test_beta_certificates(p0):
    a = F(29, 20)
    r1, r2 = beta_certificates(a, p0)
    assert r1.certificate.M == 3 and r1.certificate.Y == (BETA ** 2 * (BETA - a),)
    assert r1.certificate.strong
    assert r2.certificate.M == 7 and r2.certificate.strong
    assert set(r2.certificate.Y) == set(r2.predicted_Y)
    ya = BETA ** 5 * (BETA - a) - a
    p1 = 1 - p0
    assert (p0 ** 2 + p1 * p0 ** 2 + p1 ** 2 * p0) / BETA ** 7 == p0 / BETA ** 7
    assert r2.certificate.balance[ya] == (p0 / BETA ** 7,) * 2


def test_beta_identity_and_nodes():
    a = F(29, 20)
    assert BETA ** 5 * (BETA - a) - BETA * a == BETA ** 6 - 3 * BETA ** 3 * a
    assert check_nodes(beta_system(a, F(1, 3)), {"1-alpha": (1 - a, 1)}, beta_orbit_nodes(a)) == []


def test_beta_density():
    res = beta_density(F(29, 20), F(1, 3))
    f = res.density
    assert res.residual == 0 and f.integrate() == 1
    assert all(r == "matching" for r in res.routes)
    assert min(f.values) > 0
