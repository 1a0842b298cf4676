import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from regnash.errors import InvalidGameError
from regnash.game import CHANCE, Chance, Decision, GameTree, Terminal, validate
from regnash.games import (build_kuhn_poker, build_leduc_poker, build_matrix_game, build_polymatrix_game,
                           make_game, matrix_payoff, parse_game_text)


def T(a, b):
    return Terminal((a, b))


def test_biased_mp_structure(biased_mp):
    g = biased_mp
    assert g.num_infostates == 2
    term = g.terminals()
    assert len(term) == 4
    assert sorted(g.terminal_payoffs[term, 0]) == [-1, -1, 1, 10]
    assert np.all(g.terminal_payoffs[term].sum(axis=1) == 0)
    assert matrix_payoff(g).tolist() == [[1, -1], [-1, 10]]
    assert validate(g) == []


def test_single_action_game():
    g = build_matrix_game([[0.0]])
    assert g.num_slots == 2
    assert validate(g) == []


@pytest.mark.parametrize("bad", [[], [[]], [[1.0, np.nan]], [[1, 2], [3]]])
def test_matrix_game_rejects_bad_payoffs(bad):
    with pytest.raises(InvalidGameError):
        build_matrix_game(bad)


def test_kuhn_structure(kuhn):
    assert kuhn.num_infostates == 12
    assert [len(p) for p in kuhn.player_infostates] == [6, 6]
    root = 0
    assert kuhn.player[root] == CHANCE
    probs = kuhn.edge_chance_prob[list(kuhn.edges_of(root))]
    assert np.allclose(probs, 1 / 6)
    term = kuhn.terminals()
    assert np.all(kuhn.terminal_payoffs[term].sum(axis=1) == 0)
    assert set(np.abs(kuhn.terminal_payoffs[term, 0])) == {1.0, 2.0}
    assert validate(kuhn) == []


def test_leduc_structure():
    g = build_leduc_poker()
    assert g.num_infostates == 936
    assert validate(g) == []
    term = g.terminals()
    assert np.all(g.terminal_payoffs[term].sum(axis=1) == 0)
    for h in np.flatnonzero(g.player == CHANCE):
        assert g.edge_chance_prob[list(g.edges_of(h))].sum() == pytest.approx(1.0, abs=1e-12)


def test_infostate_partition_respects_player_and_actions(kuhn):
    for info in kuhn.infostates:
        for h in info.histories:
            assert kuhn.player[h] == info.player
            assert kuhn.history_actions[h] == info.actions
            assert kuhn.history_infostate[h] == info.index


def test_polymatrix_two_player_is_matching_pennies():
    g = build_polymatrix_game({(0, 1): [[1, -1], [-1, 1]]})
    term = g.terminals()
    assert g.terminal_payoffs[term, 0].tolist() == [1, -1, -1, 1]
    assert validate(g) == []


def test_polymatrix_null_game():
    z = np.zeros((2, 2))
    g = build_polymatrix_game({(0, 1): z, (0, 2): z, (1, 2): z})
    assert np.all(g.terminal_payoffs == 0)


def test_polymatrix_profiles_sum_to_zero(poly3):
    term = poly3.terminals()
    assert len(term) == 8
    assert np.allclose(poly3.terminal_payoffs[term].sum(axis=1), 0, atol=1e-12)


def test_polymatrix_payoff_formula():
    rng = np.random.default_rng(3)
    A01, A02, A12 = (rng.normal(size=(2, 2)) for _ in range(3))
    g = build_polymatrix_game({(0, 1): A01, (0, 2): A02, (1, 2): A12})
    blocks = {(0, 1): A01, (0, 2): A02, (1, 2): A12, (1, 0): -A01.T, (2, 0): -A02.T, (2, 1): -A12.T}
    for t, prof in zip(g.terminals(), itertools.product(range(2), repeat=3)):
        expect = [sum(blocks[(i, j)][prof[i], prof[j]] for j in range(3) if j != i) for i in range(3)]
        assert np.allclose(g.terminal_payoffs[t], expect)


def test_polymatrix_antisymmetry_violation():
    with pytest.raises(InvalidGameError, match="antisymmetry"):
        build_polymatrix_game({(0, 1): [[1, 0], [0, 1]], (1, 0): [[1, 0], [0, 1]]})


def test_validate_mixed_owner():
    root = Decision(0, "r", ["a", "b"], [Decision(1, "x", ["l", "r"], [T(1, -1), T(0, 0)]),
                                         Decision(0, "x", ["l", "r"], [T(1, -1), T(0, 0)])])
    problems = validate(GameTree.from_root(root, 2))
    assert len(problems) == 1 and "'x'" in problems[0] and "mixes" in problems[0]


def test_validate_perfect_recall():
    root = Decision(0, "r", ["a", "b"], [Decision(0, "y", ["l", "r"], [T(1, -1), T(0, 0)]),
                                         Decision(0, "y", ["l", "r"], [T(1, -1), T(0, 0)])])
    problems = validate(GameTree.from_root(root, 2))
    assert any("perfect recall" in p and "'y'" in p for p in problems)


def test_validate_action_sets_and_chance():
    root = Decision(0, "r", ["a", "b"], [Decision(1, "y", ["l", "r"], [T(1, -1), T(0, 0)]),
                                         Decision(1, "y", ["l", "r", "m"], [T(1, -1), T(0, 0), T(0, 0)])])
    assert any("action sets" in p for p in validate(GameTree.from_root(root, 2)))
    bad_chance = Chance(["a", "b"], [0.5, 0.6], [T(0, 0), T(0, 0)])
    assert any("sum to" in p for p in validate(GameTree.from_root(bad_chance, 2)))


def test_game_text_format(tmp_path):
    g = parse_game_text("# comment\nmatrix 2 2\n1 -1\n-1 10\n")
    assert matrix_payoff(g).tolist() == [[1, -1], [-1, 10]]
    with pytest.raises(InvalidGameError, match="ragged"):
        parse_game_text("matrix 2 2\n1 -1\n-1\n")
    text = "polymatrix 3\n2 2 2\n" + "\n".join(["1 0", "0 1"] * 6) + "\n"
    with pytest.raises(InvalidGameError):
        parse_game_text(text)
    path = tmp_path / "g.txt"
    path.write_text("polymatrix 2\n2 2\n1 -1\n-1 1\n-1 1\n1 -1\n")
    g2 = make_game(f"polymatrix:{path}")
    assert g2.num_players == 2 and validate(g2) == []


@given(st.lists(st.lists(st.integers(-5, 5), min_size=3, max_size=3), min_size=2, max_size=4))
def test_matrix_games_are_zero_sum(rows):
    g = build_matrix_game(rows)
    term = g.terminals()
    assert np.all(g.terminal_payoffs[term].sum(axis=1) == 0)
    assert validate(g) == []
