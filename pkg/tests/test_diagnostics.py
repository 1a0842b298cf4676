import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from regnash.diagnostics import (TRAJECTORY_COLUMNS, bregman_sum, fit_decay_rate, kl, lyapunov_J, matrix_qre,
                                 read_csv, recurrence_stat, trajectory_csv, write_csv, xi_divergence)
from regnash.dynamics import initial_state, run
from regnash.errors import FitError
from regnash.games import BUILTIN_MATRICES, build_kuhn_poker
from regnash.policy import Policy
from regnash.regularizers import ENTROPY, L2
from regnash.transforms import TransformSpec
from regnash.values import reach_probs, root_values

KUHN = build_kuhn_poker()


def test_J_at_zero_scores_uniform_reference(biased_mp):
    u = Policy.uniform(biased_mp)
    # phi*(0) = log 2 per infostate and <pi*, 0> = 0
    assert lyapunov_J(biased_mp, u, np.zeros(4)) == pytest.approx(2 * math.log(2), abs=1e-15)
    shifted = lyapunov_J(biased_mp, u, np.zeros(4)) + 2 * ENTROPY.phi([0.5, 0.5])
    assert shifted == pytest.approx(0.0, abs=1e-15)


def _phi_term(game, ref, reg):
    own = reach_probs(game, ref).info_own
    return sum(own[x.index] * reg.phi(ref.probs[x.slots]) for x in game.infostates)


def test_bregman_identity_entropy(kuhn, biased_mp, poly3):
    rng = np.random.default_rng(6)
    for game in (kuhn, biased_mp, poly3):
        ref = Policy.random(game, rng, floor=1e-3)
        phi_term = _phi_term(game, ref, ENTROPY)
        for _ in range(10):
            y = rng.normal(size=game.num_slots)
            J = lyapunov_J(game, ref, y)
            assert J + phi_term == pytest.approx(bregman_sum(game, ref, y), abs=1e-10)


def test_bregman_identity_l2(kuhn, biased_mp, poly3):
    rng = np.random.default_rng(6)
    for game in (kuhn, biased_mp, poly3):
        ref = Policy.random(game, rng, floor=1e-3)
        phi_term = _phi_term(game, ref, L2)
        for _ in range(10):
            # small scores keep the projection interior, where the identity is exact
            y = 0.1 * rng.normal(size=game.num_slots)
            assert np.all(L2.mirror_all(game, y) > 0)
            assert lyapunov_J(game, ref, y, L2) + phi_term == pytest.approx(bregman_sum(game, ref, y, L2),
                                                                              abs=1e-10)
            # on the boundary the left side only bounds the divergence from above
            y = 5 * rng.normal(size=game.num_slots)
            assert lyapunov_J(game, ref, y, L2) + phi_term >= bregman_sum(game, ref, y, L2) - 1e-10


def test_bregman_identity_as_kl(kuhn):
    rng = np.random.default_rng(1)
    ref = Policy.random(kuhn, rng)
    own = reach_probs(kuhn, ref).info_own
    y = rng.normal(size=kuhn.num_slots)
    pol = ENTROPY.mirror_all(kuhn, y)
    rhs = sum(own[x.index] * O.kl(ref.probs[x.slots], pol[x.slots]) for x in kuhn.infostates)
    lhs = lyapunov_J(kuhn, ref, y) + sum(own[x.index] * ENTROPY.phi(ref.probs[x.slots]) for x in kuhn.infostates)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@given(st.integers(0, 2**31), st.floats(-30, 30))
def test_J_shift_invariant(seed, c):
    rng = np.random.default_rng(seed)
    ref = Policy.random(KUHN, rng)
    y = rng.normal(size=KUHN.num_slots)
    info = KUHN.infostates[int(rng.integers(KUHN.num_infostates))]
    z = y.copy()
    z[info.slots] += c
    assert lyapunov_J(KUHN, ref, z) == pytest.approx(lyapunov_J(KUHN, ref, y), abs=1e-9)


def test_xi_examples(biased_mp, kuhn):
    p, q, _ = O.biased_mp_nash()
    star = Policy(biased_mp, [*p, *q])
    assert xi_divergence(biased_mp, star, star) == 0.0
    expected = 2 * O.kl(p, (0.5, 0.5))
    assert expected == pytest.approx(0.5276483172586581, abs=1e-15)
    assert xi_divergence(biased_mp, star, Policy.uniform(biased_mp)) == pytest.approx(expected, abs=1e-14)
    # mu never reaches "0:J:pb" when it always bets with the jack
    mu = Policy.from_keys(kuhn, {"0:J:": [0.0, 1.0]}, default="uniform")
    pi = Policy.from_keys(kuhn, {"0:J:": [0.0, 1.0], "0:J:pb": [0.9, 0.1]}, default="uniform")
    assert xi_divergence(kuhn, mu, pi) == 0.0
    assert math.isinf(xi_divergence(biased_mp, star, Policy(biased_mp, [1.0, 0.0, 0.5, 0.5])))


def test_xi_history_weighting(kuhn):
    rng = np.random.default_rng(0)
    mu, pi = Policy.random(kuhn, rng), Policy.random(kuhn, rng)
    reach = reach_probs(kuhn, mu)
    by_hist = sum(reach.own[x.player, h] * kl(mu.probs[x.slots], pi.probs[x.slots])
                  for x in kuhn.infostates for h in x.histories)
    assert xi_divergence(kuhn, mu, pi, "history") == pytest.approx(by_hist, abs=1e-13)
    with pytest.raises(ValueError):
        xi_divergence(kuhn, mu, pi, "other")


def test_fit_decay_rate():
    t = np.linspace(0, 10, 101)
    fit = fit_decay_rate((t, np.exp(-0.5 * t)), eta=0.5)
    assert fit.slope == pytest.approx(-0.5, abs=1e-9)
    assert fit.zeta == pytest.approx(1.0, abs=1e-9)
    assert fit_decay_rate((t, np.full_like(t, 3.0))).slope == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(FitError):
        fit_decay_rate((t[:2], np.ones(2)), transient=0.0)
    with pytest.raises(FitError):
        fit_decay_rate((t, np.zeros_like(t)))


def test_recurrence_stat():
    P = np.ones((5, 4))
    assert recurrence_stat(P, np.arange(5.0), 2.0) == (0.0, 2.0)
    with pytest.raises(ValueError):
        recurrence_stat(P, np.arange(5.0), 10.0)


def test_converging_run_does_not_return(biased_mp):
    traj = run(biased_mp, TransformSpec("zerosum", eta=1.0), dt=0.01, steps=3000, stride=50)
    d, _ = recurrence_stat(traj.policies, traj.column("time"), 5.0)
    assert d >= traj.final.policy.distance(Policy.uniform(biased_mp)) / 2


def test_matrix_qre_matches_root_finder():
    A = BUILTIN_MATRICES["biased_mp"]
    for eta in (0.5, 1.0, 10.0):
        p, q, it, d = matrix_qre(A, eta)
        po, qo = O.logit_qre_2x2(A, eta)
        assert np.abs(p - po).sum() + np.abs(q - qo).sum() < 1e-10


def test_interior_nash_equality(biased_mp):
    p, q, _ = O.biased_mp_nash()
    star = Policy(biased_mp, [*p, *q])
    v_star = root_values(biased_mp, star)
    rng = np.random.default_rng(3)
    for _ in range(100):
        pi = Policy.random(biased_mp, rng)
        total = sum(root_values(biased_mp, star.mix(pi, [i]))[i] - v_star[i] for i in range(2))
        assert abs(total) < 1e-12


def test_J_decreases_under_monotone_transform(kuhn):
    spec = TransformSpec("monotone", eta=0.5)
    ref = run(kuhn, spec, dt=0.02, steps=20000, stride=20000, with_nashconv=False).final.policy
    dt = 0.02
    traj = run(kuhn, spec, dt=dt, steps=2000, stride=10, reference=ref, with_nashconv=False)
    J = traj.column("J")
    assert np.all(np.diff(J) <= 1e-6 * dt)


def test_csv_documents_every_column(biased_mp):
    traj = run(biased_mp, TransformSpec("none"), steps=20, stride=10)
    text = trajectory_csv(traj, summary={"aborted": 0}, comments=["demo"])
    documented = {line[2:].split(":")[0] for line in text.splitlines() if line.startswith("# ")}
    header, rows, summary = read_csv(text)
    assert set(header) <= documented
    assert header == [c for c, _ in TRAJECTORY_COLUMNS]
    assert rows.shape == (3, len(header))
    assert summary == {"aborted": "0"}


def test_write_csv_is_exact():
    buf = io.StringIO()
    write_csv(buf, [("a", "x"), ("b", "y")], [[1, 0.1], [2, 1 / 3]])
    _, rows, _ = read_csv(buf.getvalue())
    assert rows[1, 1] == 1 / 3
