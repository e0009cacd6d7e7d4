from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from rmatch.density import (DensityError, StepDensity, build_A, first_level, invariant_density,
                            k_differences, orbit_closure, pair_k_difference, solve_markov_K,
                            transfer_residual)
from rmatch.exemplars import beta_density
from rmatch.linalg import nullspace
from rmatch.pwmaps import PiecewiseMap, UnsupportedError, affine_branch
from rmatch.randsys import RandomSystem
from rmatch.sbfamily import b_word, doubling_density, m_alpha, make_system

HALF = F(1, 2)
probs = st.sampled_from([F(1, 10), F(1, 4), F(1, 3), F(1, 2), F(2, 3), F(9, 10)])


def matching_alphas(lo=F(1), hi=F(3, 2), max_den=40, max_m=8):
    return st.fractions(min_value=lo, max_value=hi, max_denominator=max_den).filter(
        lambda a: lo < a < hi and isinstance(m := m_alpha(a), int) and m <= max_m)


def test_row_three_of_A():
    res = doubling_density(F(13, 10), F(1, 3))
    assert res.A[2] == [0, -1, 1, 0]
    assert all(sum(col) == 0 for col in zip(*res.A))
    assert len(nullspace(res.A)) == 1


def test_k_differences_telescope():
    for col in k_differences(make_system(F(7, 5), F(1, 3))):
        assert sum(col.dk) == 0


def test_alpha_one_density():
    for p in (F(1, 4), F(1, 3)):
        f = doubling_density(F(1), p).density
        assert f.same_function(StepDensity((F(-1), F(0), F(1)), (1 - p, p)))


def test_plateau_three_halves():
    f = doubling_density(F(3, 2), HALF).density
    assert f.value_at(F(0)) == F(2, 3)
    assert f.integrate(F(-1, 2), F(1, 2)) == F(2, 3)


def test_seven_fifths_against_grid_oracle():
    a, p = F(7, 5), HALF
    res = doubling_density(a, p)
    assert res.residual == 0
    h, vals = oracles.grid_density(a, p)
    for m, v in enumerate(vals):
        assert res.density.value_at(-1 + (m + HALF) * h) == v


def test_perturbed_density_has_residual():
    f = doubling_density(F(7, 5), HALF).density
    bumped = StepDensity(f.breakpoints, (f.values[0] + F(1, 100),) + f.values[1:])
    assert transfer_residual(make_system(F(7, 5)), bumped) > 0


def test_markov_closure_six_fifths():
    system = make_system(F(6, 5))
    seeds = {z for c in system.critical_set for z in first_level(system, c)}
    pts = orbit_closure(system, seeds)
    assert {F(1), F(4, 5), F(2, 5), F(-1, 5), F(-2, 5), F(-4, 5)} <= set(pts)
    assert {-x for x in pts} <= set(pts) | {F(-1)} | {F(1)}
    res = invariant_density(system, "auto")
    assert "markov" in res.routes and res.residual == 0
    h, vals = oracles.grid_density(F(6, 5), HALF)
    for m, v in enumerate(vals):
        assert res.density.value_at(-1 + (m + HALF) * h) == v


def test_markov_k_geometric_series():
    # x -> 2x mod 1: every orbit visits some cell at every step
    t = PiecewiseMap([0, 1], [affine_branch(0, HALF, True, False, 2, 0),
                              affine_branch(HALF, 1, True, True, 2, -1)])
    _, K = solve_markov_K(RandomSystem([t], [1]), [F(1, 3)])
    # visits weighted 1/2^k for k >= 0; the next-step weighted sum is half of it
    assert sum(K[F(1, 3)]) == 2
    assert sum(K[F(1, 3)]) / 2 == 1


def test_routes_agree_where_both_apply():
    system = make_system(F(7, 5), F(1, 3))
    m = invariant_density(system, "matching").density
    k = invariant_density(system, "markov").density
    assert m.same_function(k)


def test_k4_k5_identity():
    for a in (F(7, 5), F(111, 100), F(13, 10)):
        for p in (F(1, 3), HALF):
            system = make_system(a, p)
            M = m_alpha(a) + 1
            dk = pair_k_difference(system, F(1), 1 - a)
            deltas = [system.word_weight(b_word(a, k)) / 2 ** k for k in range(M - 1)]
            assert dk[3] + dk[4] == sum(deltas) / 2


def test_unsupported_mixed_slopes():
    # slopes 2 and 3 meet at the jump at 1/2, so visit masses do not telescope
    t = PiecewiseMap([0, 1], [affine_branch(0, HALF, True, False, 2, 0),
                              affine_branch(HALF, F(2, 3), True, False, 3, F(-3, 2)),
                              affine_branch(F(2, 3), 1, True, True, 3, -2)])
    with pytest.raises(UnsupportedError):
        invariant_density(RandomSystem([t], [1]))


def test_beta_density_finite_and_normalized():
    res = beta_density(F(29, 20), F(1, 3))
    assert res.residual == 0 and res.density.integrate() == 1


def test_matching_route_reports_failure():
    with pytest.raises(DensityError):
        invariant_density(make_system(F(6, 5)), "matching", depth_cap=10)


def test_csv_roundtrip():
    f = doubling_density(F(7, 5), F(1, 3)).density
    assert StepDensity.from_csv(f.to_csv()) == f


@settings(max_examples=30)
@given(matching_alphas(), probs)
def test_density_invariants(a, p):
    res = doubling_density(a, p)
    f = res.density
    assert f.integrate() == 1
    assert res.residual == 0
    g1, g2, g2b, g3 = res.gamma
    assert g2 == g2b == 1 / a
    assert g1 >= 0 and g3 >= 0
    assert min(f.values) > 0
    assert f.integrate(1 - a, a - 1) == (2 * a - 2) / a
    assert all(v == 1 / a for l, r, v in f.cells if l >= 1 - a and r <= a - 1)
    # upper bounds outside the plateau
    for l, r, v in f.cells:
        if l >= a - 1:
            assert v <= 1 / a - (1 - p) * (g1 + g2) / 2
        if r <= 1 - a:
            assert v <= 1 / a - p * (g2 + g3) / 2
    assert f.mirror().same_function(doubling_density(a, 1 - p).density)


@settings(max_examples=15)
@given(st.fractions(min_value=1, max_value=2, max_denominator=12).filter(lambda a: a > 1), probs)
def test_density_matches_grid_oracle(a, p):
    res = doubling_density(a, p)
    h, vals = oracles.grid_density(a, p)
    for m, v in enumerate(vals):
        assert res.density.value_at(-1 + (m + HALF) * h) == v
