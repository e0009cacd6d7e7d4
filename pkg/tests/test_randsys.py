from fractions import Fraction as F
import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from rmatch.exemplars import BETA, beta_system
from rmatch.randsys import RandomSystem
from rmatch.sbfamily import doubling_maps, make_system

alphas = st.fractions(min_value=1, max_value=2, max_denominator=40).filter(lambda a: a > 1)
probs = st.fractions(min_value=0, max_value=1, max_denominator=40).filter(lambda p: 0 < p < 1)
words = st.lists(st.integers(0, 1), max_size=8)


def test_hypotheses_doubling():
    rep = make_system(F(7, 5), F(1, 3)).check_hypotheses()
    assert rep.a2 == (True, F(1, 2))
    assert rep.in_affine_class
    # cell 1: sum_j (p_j/2) alpha / (1 - sum_j p_j/2) = alpha; middle cell: 0
    fixed = rep.fixed_points
    assert fixed[0] == F(7, 5) and fixed[2] == 0
    assert rep.c2 and fixed[0] != fixed[2]


def test_degenerate_probabilities_rejected():
    t0, t1 = doubling_maps(F(7, 5))
    with pytest.raises(ValueError):
        RandomSystem([t0, t1], [0, 1])


def test_apply_word_examples():
    s = make_system(F(3, 2))
    assert s.apply_word((), F(1))[0] == 1
    a = F(13, 10)
    assert make_system(a).apply_word((1,), 1 - a)[0] == 2 - 2 * a
    a = F(29, 20)
    bs = beta_system(a, F(1, 3))
    for j in (0, 1):
        assert bs.apply_word((j, 1), 1 - a)[0] == BETA ** 2 * (1 - a)


def test_word_weight_examples():
    s = make_system(F(7, 5), F(1, 3))
    assert s.word_weight(()) == 1
    assert s.word_weight((0, 1, 1)) == F(4, 27)
    for k in range(5):
        assert sum(s.word_weight(w) for w in itertools.product((0, 1), repeat=k)) == 1


@given(alphas, probs)
def test_hypotheses_hold_across_family(a, p):
    assert make_system(a, p).check_hypotheses().in_affine_class


@given(alphas, words, words, st.fractions(min_value=-1, max_value=1, max_denominator=97))
def test_apply_word_composes(a, u, v, x):
    s = make_system(a)
    whole = s.apply_word(tuple(u) + tuple(v), x)[0]
    assert whole == s.apply_word(tuple(v), s.apply_word(tuple(u), x)[0])[0]
    y = x
    for j in tuple(u) + tuple(v):
        y = (oracles.t0, oracles.t1)[j](a, y)
    assert whole == y


@given(probs, words, words)
def test_word_weight_multiplicative(p, u, v):
    s = make_system(F(7, 5), p)
    assert s.word_weight(tuple(u) + tuple(v)) == s.word_weight(tuple(u)) * s.word_weight(tuple(v))


def test_json_roundtrip():
    s = make_system(F(7, 5), F(1, 3))
    back = RandomSystem.from_json(s.to_json())
    assert back.probs == s.probs and back.critical_set == s.critical_set
