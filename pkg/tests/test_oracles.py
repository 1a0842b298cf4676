"""Sanity checks of the standalone oracles against closed-form numbers."""

from fractions import Fraction

import numpy as np
import pytest

import oracles as O


def test_kuhn_uniform_value_exact():
    half1 = {k: Fraction(1, 2) for k in O.P1_KEYS}
    half2 = {k: Fraction(1, 2) for k in O.P2_KEYS}
    assert O.kuhn_value(half1, half2) == Fraction(1, 8)


def test_kuhn_game_value_by_lp():
    assert O.lp_game_value(O.kuhn_payoff_matrix()) == pytest.approx(-1 / 18, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.0, 0.1, 1 / 3])
def test_kuhn_family_is_equilibrium(alpha):
    s1, s2 = O.kuhn_nash_family(alpha)
    v = O.kuhn_value(s1, s2)
    assert v == pytest.approx(-1 / 18, abs=1e-12)
    assert O.kuhn_best_response_value(0, s2) == pytest.approx(v, abs=1e-12)
    assert O.kuhn_best_response_value(1, s1) == pytest.approx(-v, abs=1e-12)


def test_biased_mp_nash_closed_form():
    p, q, v = O.biased_mp_nash()
    assert p == pytest.approx((11 / 13, 2 / 13))
    assert v == pytest.approx(9 / 13)
    A = np.array([[1, -1], [-1, 10]])
    assert A @ q == pytest.approx([v, v])


def test_logit_oracle_fixed_point():
    A = np.array([[1.0, -1.0], [-1.0, 10.0]])
    p, q = O.logit_qre_2x2(A, 1.0)
    sp = np.exp(A @ q)
    sq = np.exp(-A.T @ p)
    assert p == pytest.approx(sp / sp.sum(), abs=1e-13)
    assert q == pytest.approx(sq / sq.sum(), abs=1e-13)
