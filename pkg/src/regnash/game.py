"""Finite extensive-form games with imperfect information.

A game is described as a nested tree of :class:`Decision`, :class:`Chance` and
:class:`Terminal` nodes and then flattened by :meth:`GameTree.from_root` into
flat numpy arrays:

* histories are numbered in depth-first preorder, the root being ``0``;
* every non-terminal history owns a contiguous run of *edges* ``(h, a)`` in
  action order, so iterating edges forwards visits parents before children;
* information states are numbered densely per player in depth-first order of
  first appearance, and each one owns a contiguous run of *slots* (one per
  legal action) in the flat policy vector.

Terminal payoffs are folded into the reward of the edge entering the terminal
history, so values are always running sums of edge rewards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence, Union

import numpy as np

from .errors import InvalidGameError

CHANCE = -1
TERMINAL = -2


@dataclass
class Terminal:
    payoffs: Sequence[float]


@dataclass
class Decision:
    player: int
    infostate: Hashable
    actions: Sequence[str]
    children: Sequence["Node"]
    # Optional per-action step rewards, shape (num_actions, num_players).
    rewards: Sequence[Sequence[float]] | None = None


@dataclass
class Chance:
    actions: Sequence[str]
    probs: Sequence[float]
    children: Sequence["Node"]
    rewards: Sequence[Sequence[float]] | None = None


Node = Union[Terminal, Decision, Chance]


@dataclass(frozen=True)
class InfoState:
    """One information state: its owner, legal actions and member histories."""

    index: int  # global index, ordered by (player, local)
    player: int
    local: int  # dense per-player identifier
    key: Hashable
    actions: tuple[str, ...]
    slot: int  # first slot of this infostate in the flat policy vector
    histories: tuple[int, ...]

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    @property
    def slots(self) -> slice:
        return slice(self.slot, self.slot + len(self.actions))


def _readonly(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GameTree:
    """Immutable flattened game tree. Build with :meth:`from_root`."""

    name: str
    num_players: int
    # per history
    labels: tuple[str, ...]
    player: np.ndarray
    parent: np.ndarray
    depth: np.ndarray
    history_infostate: np.ndarray
    history_actions: tuple[tuple[str, ...], ...]
    history_keys: tuple[Hashable, ...]
    edge_start: np.ndarray
    terminal_payoffs: np.ndarray
    # per edge
    edge_parent: np.ndarray
    edge_child: np.ndarray
    edge_actor: np.ndarray
    edge_action: np.ndarray
    edge_slot: np.ndarray
    edge_chance_prob: np.ndarray
    edge_reward: np.ndarray
    # per infostate / slot
    infostates: tuple[InfoState, ...]
    player_infostates: tuple[tuple[InfoState, ...], ...]
    slot_infostate: np.ndarray
    slot_player: np.ndarray
    slot_action: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # ------------------------------------------------------------------ build
    @classmethod
    def from_root(cls, root: Node, num_players: int, name: str = "") -> "GameTree":
        if num_players < 1:
            raise InvalidGameError("a game needs at least one player")

        labels, player, parent, depth = [], [], [], []
        hist_actions, hist_keys, payoffs = [], [], []
        step_rewards, chance_probs = [], []

        # Iterative preorder walk; children are pushed in reverse so that they
        # pop in action order.
        stack = [(root, -1, 0, "")]
        while stack:
            node, par, d, label = stack.pop()
            h = len(labels)
            labels.append(label or "<root>")
            parent.append(par)
            depth.append(d)
            if isinstance(node, Terminal):
                pay = np.asarray(node.payoffs, dtype=float)
                if pay.shape != (num_players,):
                    raise InvalidGameError(
                        f"terminal {labels[h]} has {pay.size} payoffs, expected {num_players}")
                player.append(TERMINAL)
                hist_actions.append(())
                hist_keys.append(None)
                payoffs.append(pay)
                step_rewards.append(None)
                chance_probs.append(None)
                continue
            if not isinstance(node, (Decision, Chance)):
                raise InvalidGameError(f"unknown node type {type(node).__name__} at {labels[h]}")
            actions = tuple(str(a) for a in node.actions)
            if len(actions) == 0 or len(actions) != len(node.children):
                raise InvalidGameError(f"history {labels[h]} has mismatched actions/children")
            if isinstance(node, Decision):
                if not 0 <= node.player < num_players:
                    raise InvalidGameError(f"history {labels[h]} has invalid player {node.player}")
                player.append(int(node.player))
                hist_keys.append(node.infostate)
                chance_probs.append(None)
            else:
                if len(node.probs) != len(actions):
                    raise InvalidGameError(f"chance history {labels[h]} has mismatched probs")
                player.append(CHANCE)
                hist_keys.append(None)
                chance_probs.append(np.asarray(node.probs, dtype=float))
            hist_actions.append(actions)
            payoffs.append(np.zeros(num_players))
            if node.rewards is None:
                step_rewards.append(np.zeros((len(actions), num_players)))
            else:
                rew = np.asarray(node.rewards, dtype=float)
                if rew.shape != (len(actions), num_players):
                    raise InvalidGameError(f"history {labels[h]} has reward table of shape {rew.shape}")
                step_rewards.append(rew)
            prefix = "" if h == 0 else label + "/"
            for a, child in reversed(list(zip(actions, node.children))):
                stack.append((child, h, d + 1, prefix + a))

        num_h = len(labels)
        player = np.asarray(player, dtype=np.int64)
        parent = np.asarray(parent, dtype=np.int64)

        # children of each history in action order (preorder ids increase)
        children = [[] for _ in range(num_h)]
        for h in range(1, num_h):
            children[parent[h]].append(h)

        # information states: dense per-player ids in preorder of first appearance
        key_index: dict = {}
        key_list: list = []
        key_player: list[int] = []
        key_actions: list[tuple[str, ...]] = []
        key_members: list[list[int]] = []
        for h in range(num_h):
            if player[h] < 0:
                continue
            k = hist_keys[h]
            if k not in key_index:
                key_index[k] = len(key_player)
                key_list.append(k)
                key_player.append(int(player[h]))
                key_actions.append(hist_actions[h])
                key_members.append([])
            key_members[key_index[k]].append(h)

        order = sorted(range(len(key_player)), key=lambda j: (key_player[j], j))
        infostates = []
        raw_to_global = {}
        slot = 0
        local_counter = [0] * num_players
        for g, j in enumerate(order):
            p = key_player[j]
            info = InfoState(
                index=g, player=p, local=local_counter[p], key=key_list[j],
                actions=key_actions[j], slot=slot, histories=tuple(key_members[j]))
            local_counter[p] += 1
            slot += len(key_actions[j])
            infostates.append(info)
            raw_to_global[j] = g
        num_slots = slot

        history_infostate = np.full(num_h, -1, dtype=np.int64)
        for h in range(num_h):
            if player[h] >= 0:
                history_infostate[h] = raw_to_global[key_index[hist_keys[h]]]

        slot_infostate = np.empty(num_slots, dtype=np.int64)
        slot_player = np.empty(num_slots, dtype=np.int64)
        slot_action = np.empty(num_slots, dtype=np.int64)
        for info in infostates:
            for a in range(info.num_actions):
                slot_infostate[info.slot + a] = info.index
                slot_player[info.slot + a] = info.player
                slot_action[info.slot + a] = a

        # edges
        e_parent, e_child, e_actor, e_action, e_slot, e_prob, e_reward = [], [], [], [], [], [], []
        edge_start = np.full(num_h, -1, dtype=np.int64)
        for h in range(num_h):
            if player[h] == TERMINAL:
                continue
            edge_start[h] = len(e_parent)
            info = infostates[history_infostate[h]] if player[h] >= 0 else None
            for a, c in enumerate(children[h]):
                e_parent.append(h)
                e_child.append(c)
                e_actor.append(player[h])
                e_action.append(a)
                if info is not None and a < info.num_actions:
                    e_slot.append(info.slot + a)
                else:
                    e_slot.append(-1)
                e_prob.append(chance_probs[h][a] if player[h] == CHANCE else 0.0)
                r = step_rewards[h][a].copy()
                if player[c] == TERMINAL:
                    r += payoffs[c]
                e_reward.append(r)

        player_infostates = tuple(
            tuple(info for info in infostates if info.player == p) for p in range(num_players))

        return cls(
            name=name,
            num_players=num_players,
            labels=tuple(labels),
            player=_readonly(player),
            parent=_readonly(parent),
            depth=_readonly(np.asarray(depth, dtype=np.int64)),
            history_infostate=_readonly(history_infostate),
            history_actions=tuple(hist_actions),
            history_keys=tuple(hist_keys),
            edge_start=_readonly(edge_start),
            terminal_payoffs=_readonly(np.asarray(payoffs).reshape(num_h, num_players)),
            edge_parent=_readonly(np.asarray(e_parent, dtype=np.int64)),
            edge_child=_readonly(np.asarray(e_child, dtype=np.int64)),
            edge_actor=_readonly(np.asarray(e_actor, dtype=np.int64)),
            edge_action=_readonly(np.asarray(e_action, dtype=np.int64)),
            edge_slot=_readonly(np.asarray(e_slot, dtype=np.int64)),
            edge_chance_prob=_readonly(np.asarray(e_prob, dtype=float)),
            edge_reward=_readonly(np.asarray(e_reward, dtype=float).reshape(-1, num_players)),
            infostates=tuple(infostates),
            player_infostates=player_infostates,
            slot_infostate=_readonly(slot_infostate),
            slot_player=_readonly(slot_player),
            slot_action=_readonly(slot_action),
        )

    # -------------------------------------------------------------- queries
    @property
    def num_histories(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        return len(self.edge_parent)

    @property
    def num_infostates(self) -> int:
        return len(self.infostates)

    @property
    def num_slots(self) -> int:
        return len(self.slot_infostate)

    def infostate(self, player: int, local: int) -> InfoState:
        return self.player_infostates[player][local]

    def is_terminal(self, h: int) -> bool:
        return self.player[h] == TERMINAL

    def edges_of(self, h: int) -> range:
        start = self.edge_start[h]
        if start < 0:
            return range(0)
        return range(start, start + len(self.history_actions[h]))

    def edge(self, h: int, a: int) -> int:
        """Index of the edge for action index ``a`` at history ``h``."""
        if self.player[h] == TERMINAL or not 0 <= a < len(self.history_actions[h]):
            raise IndexError(f"no action {a} at history {self.labels[h]}")
        return int(self.edge_start[h] + a)

    def children(self, h: int) -> list[int]:
        return [int(self.edge_child[e]) for e in self.edges_of(h)]

    def terminals(self) -> np.ndarray:
        return np.flatnonzero(self.player == TERMINAL)

    def find(self, label: str) -> int:
        """History id from its slash-separated action path (``"<root>"`` for the root)."""
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(label) from None

    def player_histories(self, player: int) -> np.ndarray:
        return np.flatnonzero(self.player == player)

    # Cached derived index arrays used by the numeric routines.
    def cached(self, name, builder):
        if name not in self._cache:
            self._cache[name] = builder()
        return self._cache[name]

    def __repr__(self):
        return (f"GameTree(name={self.name!r}, players={self.num_players}, "
                f"histories={self.num_histories}, infostates={self.num_infostates})")


def validate(game: GameTree) -> list[str]:
    """Check the structural assumptions of the game.

    Returns a list of human-readable violations; an empty list means the tree
    is finite and rooted, every information state has a single owner and a
    single action set, the game has perfect recall, chance distributions are
    proper and strictly positive, and all rewards are finite. Never raises.
    """
    problems: list[str] = []
    n = game.num_histories
    if n == 0:
        return ["game has no histories"]

    # rooted tree: every non-root history has a valid parent that lists it as a child
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    while stack:
        h = stack.pop()
        if seen[h]:
            problems.append(f"history {game.labels[h]} reached twice (cycle or shared child)")
            continue
        seen[h] = True
        for c in game.children(h):
            if game.parent[c] != h:
                problems.append(f"history {game.labels[c]} has inconsistent parent link")
            stack.append(c)
    for h in np.flatnonzero(~seen):
        problems.append(f"history {game.labels[h]} is unreachable from the root")

    for info in game.infostates:
        owners = {int(game.player[h]) for h in info.histories}
        if owners != {info.player}:
            problems.append(
                f"infostate {info.key!r} mixes acting players {sorted(p + 1 for p in owners)}")
        action_sets = {game.history_actions[h] for h in info.histories}
        if len(action_sets) > 1:
            problems.append(f"infostate {info.key!r} has differing legal action sets")

    # perfect recall: same own (infostate, action) sequence for every member
    own_seq = _own_sequences(game)
    for info in game.infostates:
        seqs = {own_seq[h][info.player] for h in info.histories if game.player[h] == info.player}
        if len(seqs) > 1:
            problems.append(f"perfect recall violated at infostate {info.key!r} of player {info.player + 1}")

    for h in np.flatnonzero(game.player == CHANCE):
        probs = game.edge_chance_prob[list(game.edges_of(h))]
        if np.any(~np.isfinite(probs)) or np.any(probs <= 0.0):
            problems.append(f"chance history {game.labels[h]} has non-positive probabilities")
        elif abs(probs.sum() - 1.0) > 1e-12:
            problems.append(f"chance history {game.labels[h]} probabilities sum to {probs.sum()!r}")

    bad = np.flatnonzero(~np.all(np.isfinite(game.edge_reward), axis=1))
    for e in bad:
        problems.append(
            f"non-finite reward at history {game.labels[game.edge_parent[e]]}, "
            f"action {game.history_actions[game.edge_parent[e]][game.edge_action[e]]}")
    return problems


def _own_sequences(game: GameTree):
    """For each history, per player, the tuple of own (infostate key, action) pairs on the path."""
    empty = tuple(() for _ in range(game.num_players))
    seqs = [empty] * game.num_histories
    for e in range(game.num_edges):
        h = game.edge_parent[e]
        c = game.edge_child[e]
        p = game.player[h]
        if p >= 0:
            cur = list(seqs[h])
            cur[p] = cur[p] + ((game.history_keys[h], game.edge_action[e]),)
            seqs[c] = tuple(cur)
        else:
            seqs[c] = seqs[h]
    return seqs


def require_valid(game: GameTree) -> GameTree:
    problems = validate(game)
    if problems:
        raise InvalidGameError("; ".join(problems))
    return game
