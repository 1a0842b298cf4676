import numpy as np
import pytest
from hypothesis import given, strategies as st

from regnash.errors import IncompletePolicyError
from regnash.policy import Policy, dumps_policy, loads_policy, read_policy, write_policy


def test_uniform_and_random(kuhn):
    u = Policy.uniform(kuhn)
    assert np.all(u.probs == 0.5)
    r = Policy.random(kuhn, np.random.default_rng(0), floor=0.01)
    assert r.simplex_violation() < 1e-12
    assert r.is_interior(0.01 - 1e-15)


def test_from_blocks_names_missing(biased_mp):
    with pytest.raises(IncompletePolicyError, match="p1"):
        Policy.from_blocks(biased_mp, {(0, 0): [0.5, 0.5]})
    with pytest.raises(IncompletePolicyError):
        Policy.from_blocks(biased_mp, {(0, 0): [0.5, 0.5], (1, 0): [1.0]})


def test_from_keys_and_wrong_length(kuhn, biased_mp):
    p = Policy.from_keys(kuhn, {"0:J:": [0.2, 0.8]}, default="uniform")
    assert p.at(kuhn.infostates[0]).tolist() in ([0.2, 0.8], [0.5, 0.5])
    with pytest.raises(IncompletePolicyError):
        Policy(biased_mp, [0.5, 0.5])
    with pytest.raises(IncompletePolicyError):
        Policy(biased_mp, [0.5, np.nan, 0.5, 0.5])


def test_mix_takes_players_blocks(biased_mp):
    a = Policy(biased_mp, [1, 0, 1, 0])
    b = Policy(biased_mp, [0, 1, 0, 1])
    assert a.mix(b, [1]).probs.tolist() == [1, 0, 0, 1]


def test_floored_keeps_simplex(biased_mp):
    p = Policy(biased_mp, [1.0, 0.0, 0.3, 0.7]).floored(1e-6)
    assert p.probs.min() >= 1e-6
    assert p.simplex_violation() < 1e-15
    assert p.probs[2:].tolist() == [0.3, 0.7]


@given(st.integers(0, 2**31))
def test_text_roundtrip_is_exact(seed):
    from regnash.games import build_kuhn_poker
    g = build_kuhn_poker()
    p = Policy.random(g, np.random.default_rng(seed))
    q = loads_policy(dumps_policy(p), g)
    assert np.array_equal(p.probs, q.probs)


def test_file_roundtrip(tmp_path, kuhn):
    p = Policy.random(kuhn, np.random.default_rng(1))
    write_policy(p, tmp_path / "p.txt")
    assert np.array_equal(read_policy(tmp_path / "p.txt", kuhn).probs, p.probs)
    (tmp_path / "bad.txt").write_text("0 x 0.5 0.5\n")
    with pytest.raises(IncompletePolicyError, match="malformed"):
        read_policy(tmp_path / "bad.txt", kuhn)
