"""Behavioural policies: one distribution over legal actions per information state."""

from __future__ import annotations

import io
import os
from typing import Iterable, Mapping

import numpy as np

from .errors import IncompletePolicyError
from .game import GameTree

EPS_INTERIOR = 1e-9
PROB_FLOOR = 1e-12


class Policy:
    """A joint policy stored as one flat probability vector over the game's slots.

    ``probs[info.slot + a]`` is the probability of action ``a`` at ``info``.
    Policies are plain data: methods return new objects instead of mutating.
    """

    __slots__ = ("game", "probs")

    def __init__(self, game: GameTree, probs, copy: bool = True):
        arr = np.array(probs, dtype=float, copy=copy)
        if arr.shape != (game.num_slots,):
            raise IncompletePolicyError(
                f"policy has {arr.size} entries, game {game.name!r} needs {game.num_slots}")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            info = game.infostates[game.slot_infostate[bad]]
            raise IncompletePolicyError(f"policy undefined at infostate {info.key!r}")
        self.game = game
        self.probs = arr

    # ------------------------------------------------------------ builders
    @classmethod
    def uniform(cls, game: GameTree) -> "Policy":
        probs = np.empty(game.num_slots)
        for info in game.infostates:
            probs[info.slots] = 1.0 / info.num_actions
        return cls(game, probs, copy=False)

    @classmethod
    def from_blocks(cls, game: GameTree, blocks: Mapping) -> "Policy":
        """Build from ``{(player, local_infostate_id): probabilities}``.

        Raises :class:`IncompletePolicyError` naming the first missing block.
        """
        probs = np.full(game.num_slots, np.nan)
        for info in game.infostates:
            key = (info.player, info.local)
            if key not in blocks:
                raise IncompletePolicyError(
                    f"no distribution for player {info.player} infostate {info.local} ({info.key!r})")
            block = np.asarray(blocks[key], dtype=float)
            if block.shape != (info.num_actions,):
                raise IncompletePolicyError(
                    f"infostate {info.key!r} expects {info.num_actions} probabilities, got {block.size}")
            probs[info.slots] = block
        return cls(game, probs, copy=False)

    @classmethod
    def from_keys(cls, game: GameTree, mapping: Mapping, default=None) -> "Policy":
        """Build from ``{infostate key: probabilities}``; missing keys take ``default``
        (``"uniform"`` or ``None`` to raise)."""
        probs = np.empty(game.num_slots)
        for info in game.infostates:
            if info.key in mapping:
                probs[info.slots] = mapping[info.key]
            elif default == "uniform":
                probs[info.slots] = 1.0 / info.num_actions
            else:
                raise IncompletePolicyError(f"no distribution for infostate {info.key!r}")
        return cls(game, probs, copy=False)

    @classmethod
    def random(cls, game: GameTree, rng: np.random.Generator, concentration: float = 1.0,
               floor: float = 0.0) -> "Policy":
        """Dirichlet-distributed blocks, optionally mixed with uniform by ``floor``."""
        probs = np.empty(game.num_slots)
        for info in game.infostates:
            p = rng.dirichlet(np.full(info.num_actions, concentration))
            if floor:
                p = (1 - floor * info.num_actions) * p + floor
            probs[info.slots] = p
        return cls(game, probs, copy=False)

    # ------------------------------------------------------------- queries
    def block(self, player: int, local: int) -> np.ndarray:
        return self.probs[self.game.infostate(player, local).slots]

    def at(self, info) -> np.ndarray:
        return self.probs[info.slots]

    def blocks(self) -> Iterable:
        for info in self.game.infostates:
            yield info, self.probs[info.slots]

    def simplex_violation(self) -> float:
        """Largest deviation from the simplex over all blocks (0 for a valid policy)."""
        sums = np.add.reduceat(self.probs, _starts(self.game)) if self.game.num_slots else np.zeros(0)
        worst = np.max(np.abs(sums - 1.0), initial=0.0)
        return max(worst, float(-np.min(self.probs, initial=0.0)))

    def is_interior(self, eps: float = EPS_INTERIOR) -> bool:
        return bool(np.all(self.probs >= eps))

    # --------------------------------------------------------- combinators
    def mix(self, other: "Policy", players: Iterable[int]) -> "Policy":
        """Copy of ``self`` whose blocks for ``players`` are taken from ``other``."""
        mask = np.isin(self.game.slot_player, list(players))
        return Policy(self.game, np.where(mask, other.probs, self.probs), copy=False)

    def floored(self, eps: float = PROB_FLOOR) -> "Policy":
        """Blocks with an entry below ``eps`` become ``(1 - n eps) p + eps``.

        Every probability ends up at least ``eps`` and blocks still sum to 1.
        """
        game = self.game
        low = np.minimum.reduceat(self.probs, _starts(game)) < eps
        if not low.any():
            return self.copy()
        n = np.diff(np.append(_starts(game), game.num_slots))
        mask = low[game.slot_infostate]
        p = self.probs.copy()
        p[mask] = p[mask] * (1.0 - n[game.slot_infostate][mask] * eps) + eps
        return Policy(game, p, copy=False)

    def distance(self, other: "Policy") -> float:
        """L1 distance summed over all information states."""
        return float(np.abs(self.probs - other.probs).sum())

    def copy(self) -> "Policy":
        return Policy(self.game, self.probs)

    def __repr__(self):
        return f"Policy(game={self.game.name!r}, slots={self.game.num_slots})"


def _starts(game: GameTree) -> np.ndarray:
    return game.cached("slot_starts", lambda: np.array([i.slot for i in game.infostates], dtype=np.int64))


# ------------------------------------------------------------------ text io
def dumps_policy(policy: Policy) -> str:
    """Serialise as one line per infostate: ``player infostate p_0 p_1 ...``.

    Probabilities use 17 significant digits so that reading back is bit-exact.
    """
    out = io.StringIO()
    out.write(f"# policy for {policy.game.name or 'game'}: player infostate probabilities...\n")
    for info, block in policy.blocks():
        nums = " ".join(format(float(v), ".17g") for v in block)
        out.write(f"{info.player} {info.local} {nums}\n")
    return out.getvalue()


def loads_policy(text: str, game: GameTree) -> Policy:
    blocks = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            player, local = int(parts[0]), int(parts[1])
            blocks[(player, local)] = [float(v) for v in parts[2:]]
        except (ValueError, IndexError):
            raise IncompletePolicyError(f"malformed policy line {lineno}: {line!r}") from None
    return Policy.from_blocks(game, blocks)


def write_policy(policy: Policy, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_policy(policy))


def read_policy(path: str | os.PathLike, game: GameTree) -> Policy:
    with open(path) as fh:
        return loads_policy(fh.read(), game)
