"""Constructors for the test games and the plain-text matrix/polymatrix format."""

from __future__ import annotations

import itertools
import os
from typing import Mapping

import numpy as np

from .errors import InvalidGameError
from .game import Chance, Decision, GameTree, Terminal
from .policy import Policy

BUILTIN_MATRICES = {
    "biased_mp": [[1.0, -1.0], [-1.0, 10.0]],
    "matching_pennies": [[1.0, -1.0], [-1.0, 1.0]],
    "rps": [[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]],
}


def _as_matrix(payoff) -> np.ndarray:
    try:
        mat = np.asarray(payoff, dtype=float)
    except ValueError:
        raise InvalidGameError("payoff matrix rows have different lengths") from None
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise InvalidGameError(f"payoff matrix must be a non-empty 2-d array, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise InvalidGameError("payoff matrix contains non-finite entries")
    return mat


def build_matrix_game(payoff, name: str = "matrix") -> GameTree:
    """Two-player zero-sum normal-form game embedded as a two-ply tree.

    Player 0 picks a row at the root; player 1 picks a column without seeing
    it (all of player 1's histories share one information state). Player 0
    receives ``payoff[row, col]`` and player 1 its negation.
    """
    mat = _as_matrix(payoff)
    rows, cols = mat.shape
    col_actions = [f"c{j}" for j in range(cols)]
    children = []
    for i in range(rows):
        leaves = [Terminal((mat[i, j], -mat[i, j])) for j in range(cols)]
        children.append(Decision(1, "p1", col_actions, leaves))
    root = Decision(0, "p0", [f"r{i}" for i in range(rows)], children)
    return GameTree.from_root(root, num_players=2, name=name)


def build_polymatrix_game(matrices, num_players: int | None = None, name: str = "polymatrix",
                          tol: float = 1e-12) -> GameTree:
    """Zero-sum polymatrix game: player ``i`` earns ``sum_j A[i, j][a_i, a_j]``.

    ``matrices`` maps ordered pairs ``(i, j)`` to payoff blocks. When only one
    of ``(i, j)`` / ``(j, i)`` is given the other is filled in as the negated
    transpose; when both are given they must be antisymmetric within ``tol``.
    Players move in index order, each blind to the others' choices.
    """
    if not isinstance(matrices, Mapping):
        matrices = {(i, j): m for i, row in enumerate(matrices)
                    for j, m in enumerate(row) if m is not None and i != j}
    blocks = {(int(i), int(j)): _as_matrix(m) for (i, j), m in matrices.items()}
    if any(i == j for i, j in blocks):
        raise InvalidGameError("polymatrix game cannot have a self-interaction block")
    n = num_players if num_players is not None else 1 + max(max(k) for k in blocks)
    if n < 2:
        raise InvalidGameError("polymatrix game needs at least two players")
    for (i, j), m in list(blocks.items()):
        if (j, i) in blocks:
            if blocks[(j, i)].shape != m.T.shape:
                raise InvalidGameError(f"blocks ({i},{j}) and ({j},{i}) have inconsistent shapes")
            gap = np.max(np.abs(m + blocks[(j, i)].T))
            if gap > tol:
                raise InvalidGameError(
                    f"antisymmetry violated between players {i} and {j}: max |A_ij + A_ji^T| = {gap:.3g}")
        else:
            blocks[(j, i)] = -m.T
    sizes = [None] * n
    for (i, j), m in blocks.items():
        for p, k in ((i, m.shape[0]), (j, m.shape[1])):
            if sizes[p] is None:
                sizes[p] = k
            elif sizes[p] != k:
                raise InvalidGameError(f"player {p} has inconsistent action counts {sizes[p]} vs {k}")
    sizes = [s if s is not None else 1 for s in sizes]

    def payoff(profile):
        out = np.zeros(n)
        for (i, j), m in blocks.items():
            out[i] += m[profile[i], profile[j]]
        return out

    def node(p, prefix):
        if p == n:
            return Terminal(payoff(prefix))
        acts = [f"a{k}" for k in range(sizes[p])]
        return Decision(p, f"p{p}", acts, [node(p + 1, prefix + (k,)) for k in range(sizes[p])])

    return GameTree.from_root(node(0, ()), num_players=n, name=name)


# ----------------------------------------------------------------- Kuhn poker
KUHN_CARDS = "JQK"


def build_kuhn_poker() -> GameTree:
    """Standard two-player Kuhn poker (ante 1, bet 1, cards J < Q < K)."""

    def showdown(c0, c1, stake):
        return (stake, -stake) if c0 > c1 else (-stake, stake)

    deals = list(itertools.permutations(range(3), 2))
    children = []
    for c0, c1 in deals:
        k0, k1 = KUHN_CARDS[c0], KUHN_CARDS[c1]
        after_pass_bet = Decision(0, f"0:{k0}:pb", ["p", "b"], [
            Terminal((-1.0, 1.0)),
            Terminal(showdown(c0, c1, 2.0)),
        ])
        after_pass = Decision(1, f"1:{k1}:p", ["p", "b"], [
            Terminal(showdown(c0, c1, 1.0)),
            after_pass_bet,
        ])
        after_bet = Decision(1, f"1:{k1}:b", ["p", "b"], [
            Terminal((1.0, -1.0)),
            Terminal(showdown(c0, c1, 2.0)),
        ])
        children.append(Decision(0, f"0:{k0}:", ["p", "b"], [after_pass, after_bet]))
    root = Chance([f"{KUHN_CARDS[a]}{KUHN_CARDS[b]}" for a, b in deals], [1.0 / 6] * 6, children)
    return GameTree.from_root(root, num_players=2, name="kuhn_poker")


def kuhn_equilibrium(game: GameTree | None = None, alpha: float = 1.0 / 3) -> Policy:
    """Member ``alpha`` in [0, 1/3] of the standard one-parameter Kuhn equilibrium family."""
    if not 0.0 <= alpha <= 1.0 / 3 + 1e-15:
        raise ValueError(f"alpha must lie in [0, 1/3], got {alpha!r}")
    game = game or build_kuhn_poker()
    bet = {"0:J:": alpha, "0:Q:": 0.0, "0:K:": 3 * alpha, "0:J:pb": 0.0, "0:Q:pb": alpha + 1.0 / 3,
           "0:K:pb": 1.0, "1:J:p": 1.0 / 3, "1:Q:p": 0.0, "1:K:p": 1.0, "1:J:b": 0.0, "1:Q:b": 1.0 / 3,
           "1:K:b": 1.0}
    return Policy.from_keys(game, {k: [1.0 - v, v] for k, v in bet.items()})


# ---------------------------------------------------------------- Leduc poker
def build_leduc_poker() -> GameTree:
    """Two-player Leduc hold'em with the usual rules.

    Six cards (three ranks, two suits), ante 1, raise sizes 2 then 4, at most
    two raises per round, one public card between rounds. Information states
    distinguish individual cards, giving 936 of them.
    """
    ranks = "JQK"

    def card_name(c):
        return f"{ranks[c // 2]}{'sh'[c % 2]}"

    def winner(c0, c1, pub):
        r0, r1, rp = c0 // 2, c1 // 2, pub // 2
        if r0 == rp:
            return 0
        if r1 == rp:
            return 1
        if r0 == r1:
            return -1
        return 0 if r0 > r1 else 1

    def settle(contrib, folded, cards, pub):
        if folded is not None:
            w = 1 - folded
        else:
            w = winner(cards[0], cards[1], pub)
        if w == -1:
            return Terminal((0.0, 0.0))
        pot_loss = contrib[1 - w]
        out = [0.0, 0.0]
        out[w] = pot_loss
        out[1 - w] = -pot_loss
        return Terminal(tuple(out))

    def betting(cards, pub, rnd, hist, contrib, raises, to_act, acted):
        # hist: tuple of per-round action strings
        if pub is None:
            key_pub = ""
        else:
            key_pub = card_name(pub)
        key = f"{to_act}:{card_name(cards[to_act])}:{key_pub}:{'/'.join(hist)}"
        cur = hist[-1]
        facing = contrib[1 - to_act] > contrib[to_act]
        actions, children = [], []
        raise_size = 2.0 if rnd == 0 else 4.0
        if facing:
            actions.append("f")
            children.append(settle(contrib, to_act, cards, pub))
        # call / check
        new_contrib = list(contrib)
        new_contrib[to_act] = contrib[1 - to_act]
        new_hist = hist[:-1] + (cur + "c",)
        actions.append("c")
        if acted:  # a call after the opponent has acted closes the round
            children.append(end_round(cards, pub, rnd, new_hist, new_contrib))
        else:
            children.append(betting(cards, pub, rnd, new_hist, tuple(new_contrib), raises, 1 - to_act, True))
        if raises < 2:
            rc = list(contrib)
            rc[to_act] = contrib[1 - to_act] + raise_size
            actions.append("r")
            children.append(betting(cards, pub, rnd, hist[:-1] + (cur + "r",), tuple(rc),
                                    raises + 1, 1 - to_act, True))
        return Decision(to_act, key, actions, children)

    def end_round(cards, pub, rnd, hist, contrib):
        if rnd == 1:
            return settle(contrib, None, cards, pub)
        remaining = [c for c in range(6) if c not in cards]
        kids = [betting(cards, p, 1, hist + ("",), tuple(contrib), 0, 0, False) for p in remaining]
        return Chance([card_name(p) for p in remaining], [1.0 / len(remaining)] * len(remaining), kids)

    def deal_second(c0):
        rest = [c for c in range(6) if c != c0]
        kids = [betting((c0, c1), None, 0, ("",), (1.0, 1.0), 0, 0, False) for c1 in rest]
        return Chance([card_name(c) for c in rest], [1.0 / 5] * 5, kids)

    root = Chance([card_name(c) for c in range(6)], [1.0 / 6] * 6, [deal_second(c) for c in range(6)])
    return GameTree.from_root(root, num_players=2, name="leduc_poker")


# ------------------------------------------------------------ text format
def parse_game_text(text: str, name: str = "file") -> GameTree:
    """Parse the plain-text matrix/polymatrix format.

    ``matrix R C`` is followed by R rows of C numbers (player 0's payoffs).
    ``polymatrix N`` is followed by a line of N action counts and then, for
    every ordered pair ``(i, j)`` with ``i != j`` in lexicographic order, the
    ``n_i`` rows of ``n_j`` numbers of block ``A_ij``. Blank lines and lines
    starting with ``#`` are ignored; ragged rows are rejected.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InvalidGameError("empty game file")
    head = lines[0].split()
    body = lines[1:]

    def rows(start, count, width):
        if start + count > len(body):
            raise InvalidGameError(f"game file ends early: expected {count} rows from line {start + 2}")
        out = []
        for k in range(start, start + count):
            try:
                vals = [float(v) for v in body[k].split()]
            except ValueError:
                raise InvalidGameError(f"non-numeric entry on row {k + 2}: {body[k]!r}") from None
            if len(vals) != width:
                raise InvalidGameError(f"ragged row {k + 2}: expected {width} numbers, got {len(vals)}")
            out.append(vals)
        return out

    try:
        if head[0] == "matrix" and len(head) == 3:
            r, c = int(head[1]), int(head[2])
            if r < 1 or c < 1:
                raise InvalidGameError("matrix dimensions must be positive")
            mat = rows(0, r, c)
            if len(body) != r:
                raise InvalidGameError(f"expected {r} rows, found {len(body)}")
            return build_matrix_game(mat, name=name)
        if head[0] == "polymatrix" and len(head) == 2:
            n = int(head[1])
            sizes = [int(v) for v in body[0].split()]
            if len(sizes) != n or min(sizes) < 1:
                raise InvalidGameError(f"expected {n} positive action counts, got {body[0]!r}")
            pos = 1
            blocks = {}
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    blocks[(i, j)] = rows(pos, sizes[i], sizes[j])
                    pos += sizes[i]
            if pos != len(body):
                raise InvalidGameError(f"{len(body) - pos} unexpected trailing rows")
            return build_polymatrix_game(blocks, num_players=n, name=name)
    except ValueError as exc:
        if isinstance(exc, InvalidGameError):
            raise
        raise InvalidGameError(f"malformed header or counts: {exc}") from None
    raise InvalidGameError(f"unrecognised header {lines[0]!r}; expected 'matrix R C' or 'polymatrix N'")


def load_game_file(path: str | os.PathLike) -> GameTree:
    with open(path) as fh:
        return parse_game_text(fh.read(), name=os.path.basename(str(path)))


def make_game(selector: str) -> GameTree:
    """Resolve ``kuhn``, ``leduc``, ``matrix:<path|builtin>`` or ``polymatrix:<path>``."""
    if selector == "kuhn":
        return build_kuhn_poker()
    if selector == "leduc":
        return build_leduc_poker()
    kind, _, arg = selector.partition(":")
    if kind == "matrix" and arg:
        if arg in BUILTIN_MATRICES and not os.path.exists(arg):
            return build_matrix_game(BUILTIN_MATRICES[arg], name=arg)
        game = load_game_file(arg)
        if game.num_players != 2 or len(game.player_infostates[0]) != 1:
            raise InvalidGameError(f"{arg} does not describe a matrix game")
        return game
    if kind == "polymatrix" and arg:
        return load_game_file(arg)
    raise InvalidGameError(f"unknown game selector {selector!r}")


def matrix_payoff(game: GameTree) -> np.ndarray:
    """Player 0's payoff matrix of a game built by :func:`build_matrix_game`."""
    if game.num_players != 2 or len(game.player_infostates[0]) != 1 or len(game.player_infostates[1]) != 1:
        raise InvalidGameError(f"{game.name!r} is not a two-player matrix game")
    rows = game.player_infostates[0][0].num_actions
    cols = game.player_infostates[1][0].num_actions
    return game.terminal_payoffs[game.terminals(), 0].reshape(rows, cols)


def matrix_nash(payoff) -> tuple:
    """Maximin strategies and value of a zero-sum matrix game via linear programming."""
    from scipy.optimize import linprog

    A = _as_matrix(payoff)

    def maximin(M):
        m, n = M.shape
        # variables (x_1..x_m, v): maximise v s.t. M^T x >= v, sum x = 1, x >= 0
        c = np.r_[np.zeros(m), -1.0]
        A_ub = np.c_[-M.T, np.ones(n)]
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=np.r_[np.ones(m), 0.0][None, :], b_eq=[1.0],
                      bounds=[(0, None)] * m + [(None, None)], method="highs")
        if not res.success:
            raise ArithmeticError(f"linear program failed: {res.message}")
        return res.x[:m], res.x[m]

    p, v = maximin(A)
    q, _ = maximin(-A.T)
    return p, q, v
