"""Reach probabilities, value functions, best responses and NashConv."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from . import _kernels as K
from .errors import IncompletePolicyError, NumericError
from .game import TERMINAL, GameTree
from .policy import Policy


def kernel_args(game: GameTree) -> tuple:
    """Flat arrays in the order expected by the compiled integrator."""

    def build():
        info_start = np.array([i.slot for i in game.infostates], dtype=np.int64)
        info_len = np.array([i.num_actions for i in game.infostates], dtype=np.int64)
        info_player = np.array([i.player for i in game.infostates], dtype=np.int64)
        return (game.edge_parent, game.edge_child, game.edge_actor, game.edge_slot,
                game.edge_chance_prob, np.ascontiguousarray(game.edge_reward, dtype=float),
                game.history_infostate, info_player, info_start, info_len,
                info_start[game.slot_infostate])

    return game.cached("kernel_args", build)


def _check_policy(game: GameTree, policy: Policy) -> None:
    if policy.game is not game and policy.probs.shape != (game.num_slots,):
        raise IncompletePolicyError("policy does not belong to this game")


@dataclass(frozen=True)
class ReachTable:
    """Reach probabilities of every history and information state.

    ``own[i, h]`` is player i's own contribution, ``others[i, h]`` that of
    everyone else including chance, ``total[h]`` their product.
    ``info_own[x]``, ``info_others[x]`` and ``info_total[x]`` are for the owner
    of ``x``: own reach is shared by the member histories under perfect recall,
    the other two are summed over members.
    """

    own: np.ndarray
    others: np.ndarray
    total: np.ndarray
    edge_prob: np.ndarray
    info_own: np.ndarray
    info_others: np.ndarray
    info_total: np.ndarray


def reach_probs(game: GameTree, policy: Policy) -> ReachTable:
    _check_policy(game, policy)
    eprob = K.edge_probs(game.edge_actor, game.edge_slot, game.edge_chance_prob, policy.probs)
    own, others, total = K.forward(game.edge_parent, game.edge_child, game.edge_actor, eprob,
                                   game.num_players, game.num_histories)
    info_player = kernel_args(game)[7]
    info_others = K.infostate_reach(game.history_infostate, info_player, others, game.num_infostates)
    info_own = np.zeros(game.num_infostates)
    info_total = np.zeros(game.num_infostates)
    for info in game.infostates:
        hs = list(info.histories)
        info_own[info.index] = own[info.player, hs[0]]
        info_total[info.index] = total[hs].sum()
    return ReachTable(own, others, total, eprob, info_own, info_others, info_total)


# --------------------------------------------------------------- rewards
@runtime_checkable
class RewardFunction(Protocol):
    """Reward of every player for taking action ``a`` at history ``h`` under ``policy``."""

    policy_dependent: bool

    def __call__(self, game: GameTree, policy: Policy, h: int, a: int) -> np.ndarray: ...

    def table(self, game: GameTree, policy: Policy) -> np.ndarray: ...


class BaseReward:
    """The game's own (policy-independent) rewards."""

    policy_dependent = False

    def __call__(self, game, policy, h, a):
        return np.array(game.edge_reward[game.edge(h, a)])

    def table(self, game, policy):
        return game.edge_reward


BASE_REWARD = BaseReward()


def _reward_table(game, policy, reward) -> np.ndarray:
    if reward is None:
        return game.edge_reward
    if hasattr(reward, "table"):
        table = np.asarray(reward.table(game, policy), dtype=float)
    else:
        table = np.empty((game.num_edges, game.num_players))
        for e in range(game.num_edges):
            table[e] = reward(game, policy, int(game.edge_parent[e]), int(game.edge_action[e]))
    if table.shape != (game.num_edges, game.num_players):
        raise NumericError(f"reward table has shape {table.shape}")
    finite = np.all(np.isfinite(table), axis=1)
    if not finite.all():
        e = int(np.flatnonzero(~finite)[0])
        h = int(game.edge_parent[e])
        a = game.history_actions[h][game.edge_action[e]]
        raise NumericError(f"non-finite reward at history {game.labels[h]!r}, action {a!r}")
    return table


# ---------------------------------------------------------------- values
@dataclass(frozen=True)
class ValueTable:
    """History values ``V[i, h]``, edge values ``Q[e, i]`` and infostate values.

    ``info_Q[s]`` is the counterfactual infostate value of slot ``s`` for the
    owner of its infostate and ``info_V[x]`` its policy average. Where the
    counterfactual reach of ``x`` is zero the member histories are averaged
    without weights.
    """

    V: np.ndarray
    Q: np.ndarray
    info_Q: np.ndarray
    info_V: np.ndarray
    reach: ReachTable
    reward: np.ndarray

    def root(self, player: int | None = None):
        return self.V[:, 0].copy() if player is None else float(self.V[player, 0])


def value_tables(game: GameTree, policy: Policy, reward: RewardFunction | None = None) -> ValueTable:
    reach = reach_probs(game, policy)
    table = _reward_table(game, policy, reward)
    V, Q = K.backward(game.edge_parent, game.edge_child, reach.edge_prob, np.ascontiguousarray(table),
                      game.num_histories)
    info_Q = np.zeros(game.num_slots)
    info_V = np.zeros(game.num_infostates)
    for info in game.infostates:
        i = info.player
        hs = np.asarray(info.histories)
        starts = game.edge_start[hs]
        w = reach.others[i, hs]
        qs = np.stack([Q[starts + a, i] for a in range(info.num_actions)], axis=1)
        wsum = w.sum()
        if wsum > 0:
            q = w @ qs / wsum
        else:
            q = qs.mean(axis=0)
        info_Q[info.slots] = q
        info_V[info.index] = policy.probs[info.slots] @ q
    return ValueTable(V, Q, info_Q, info_V, reach, table)


def root_values(game: GameTree, policy: Policy, reward=None) -> np.ndarray:
    """Root value of every player (cheaper than a full :func:`value_tables`)."""
    table = _reward_table(game, policy, reward)
    eprob = K.edge_probs(game.edge_actor, game.edge_slot, game.edge_chance_prob, policy.probs)
    V, _ = K.backward(game.edge_parent, game.edge_child, eprob, np.ascontiguousarray(table), game.num_histories)
    return V[:, 0].copy()


# --------------------------------------------------------- best response
def _infostate_order(game: GameTree, player: int) -> list:
    """Player's infostates, deepest first in the own-sequence forest."""

    def build():
        depth = {}
        for info in game.player_infostates[player]:
            h = info.histories[0]
            d, p = 0, game.parent[h]
            while p >= 0:
                if game.player[p] == player:
                    d += 1
                p = game.parent[p]
            depth[info.index] = d
        return sorted(game.player_infostates[player], key=lambda x: (-depth[x.index], x.index))

    return game.cached(("br_order", player), build)


def best_response(game: GameTree, policy: Policy, player: int, reward=None, tie_tol: float = 1e-12):
    """Best response of ``player`` to the others' part of ``policy``.

    Counterfactual backward induction over the player's infostates; ties are
    broken towards the lowest action index. Returns ``(policy, value)`` where
    the policy equals ``policy`` except at ``player``'s infostates, which are
    pure.
    """
    table = _reward_table(game, policy, reward)
    reach = reach_probs(game, policy)
    cf = reach.others[player]
    H = game.num_histories
    choice = np.full(game.num_infostates, -1, dtype=np.int64)
    W = np.full(H, np.nan)
    eprob = reach.edge_prob
    pl, hinfo, start = game.player, game.history_infostate, game.edge_start
    nact = np.array([len(a) for a in game.history_actions])

    def value(h):
        # Iterative post-order so deep trees do not hit the recursion limit.
        stack = [(h, False)]
        while stack:
            node, expanded = stack.pop()
            if not np.isnan(W[node]):
                continue
            if pl[node] == TERMINAL:
                W[node] = 0.0
                continue
            s0 = start[node]
            kids = game.edge_child[s0:s0 + nact[node]]
            if pl[node] == player:
                kids = kids[choice[hinfo[node]]:choice[hinfo[node]] + 1]
            if not expanded:
                stack.append((node, True))
                stack.extend((int(c), False) for c in kids if np.isnan(W[c]))
                continue
            if pl[node] == player:
                e = s0 + choice[hinfo[node]]
                W[node] = table[e, player] + W[game.edge_child[e]]
            else:
                es = np.arange(s0, s0 + nact[node])
                W[node] = float(eprob[es] @ (table[es, player] + W[game.edge_child[es]]))
        return W[h]

    for info in _infostate_order(game, player):
        scores = np.zeros(info.num_actions)
        for h in info.histories:
            if cf[h] == 0.0:
                continue
            s0 = start[h]
            for a in range(info.num_actions):
                c = game.edge_child[s0 + a]
                scores[a] += cf[h] * (table[s0 + a, player] + value(int(c)))
        best = scores.max()
        a_star = int(np.flatnonzero(scores >= best - tie_tol * (1.0 + abs(best)))[0])
        choice[info.index] = a_star
    probs = policy.probs.copy()
    for info in game.player_infostates[player]:
        block = np.zeros(info.num_actions)
        block[choice[info.index]] = 1.0
        probs[info.slots] = block
    return Policy(game, probs, copy=False), float(value(0))


def nash_conv(game: GameTree, policy: Policy, reward=None, per_player: bool = False):
    """Sum over players of the best-response gain against ``policy``."""
    on_policy = root_values(game, policy, reward)
    gains = np.array([best_response(game, policy, i, reward)[1] - on_policy[i]
                      for i in range(game.num_players)])
    return gains if per_player else float(gains.sum())


def monotonicity_gap(game: GameTree, pi: Policy, mu: Policy, reward=None):
    """Per-player Omega^i(pi, mu) at the root and their sum.

    A policy-dependent ``reward`` is evaluated at each of the four profiles.
    """
    omegas = np.zeros(game.num_players)
    for i in range(game.num_players):
        others = [j for j in range(game.num_players) if j != i]
        v = lambda prof: root_values(game, prof, reward)[i]
        omegas[i] = v(pi) - v(pi.mix(mu, [i])) - v(pi.mix(mu, others)) + v(mu)
    return omegas, float(omegas.sum())
