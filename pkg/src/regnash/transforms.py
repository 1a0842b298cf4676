"""Policy-dependent log-ratio reward transformations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DomainError, SpecError, UnsupportedError
from .game import CHANCE, GameTree
from .policy import EPS_INTERIOR, PROB_FLOOR, Policy
from .values import kernel_args, reach_probs, value_tables

VARIANTS = ("none", "monotone", "zerosum")
DENOMINATORS = ("per_history", "per_infostate")
REACH_FLOOR = 1e-8


@dataclass(frozen=True)
class TransformSpec:
    """Which transformation to apply and with what strength and anchor.

    ``anchor=None`` means the uniform policy. ``blend_from`` optionally holds a
    second anchor; the effective log-anchor is then
    ``(1 - blend) * log(blend_from) + blend * log(anchor)``.
    """

    variant: str = "none"
    eta: float = 1.0
    anchor: Policy | None = None
    denominator_mode: str = "per_infostate"
    reach_floor: float = REACH_FLOOR
    blend_from: Policy | None = None
    blend: float = 1.0
    anchor_floor: float = EPS_INTERIOR
    _log: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SpecError(f"unknown transform variant {self.variant!r}")
        if self.denominator_mode not in DENOMINATORS:
            raise SpecError(f"unknown denominator mode {self.denominator_mode!r}")
        if self.variant != "none" and not (self.eta > 0 and math.isfinite(self.eta)):
            raise SpecError(f"eta must be positive, got {self.eta!r}")
        if not self.reach_floor > 0:
            raise SpecError("reach_floor must be positive")
        if not 0.0 <= self.blend <= 1.0:
            raise SpecError("blend must lie in [0, 1]")
        for pol in (self.anchor, self.blend_from):
            if pol is not None and not pol.is_interior(self.anchor_floor):
                raise SpecError(
                    f"anchor policy is not interior: min probability {pol.probs.min():.3g} < {self.anchor_floor}")

    @property
    def variant_code(self) -> int:
        return VARIANTS.index(self.variant)

    @property
    def den_code(self) -> int:
        return K.DEN_HISTORY if self.denominator_mode == "per_history" else K.DEN_INFOSTATE

    def anchor_policy(self, game: GameTree) -> Policy:
        return self.anchor if self.anchor is not None else Policy.uniform(game)

    def log_anchor(self, game: GameTree) -> np.ndarray:
        key = id(game)
        if key not in self._log:
            log_new = np.log(self.anchor_policy(game).probs)
            if self.blend_from is not None and self.blend < 1.0:
                log_new = (1.0 - self.blend) * np.log(self.blend_from.probs) + self.blend * log_new
            self._log[key] = log_new
        return self._log[key]

    def with_anchor(self, anchor: Policy, **changes) -> "TransformSpec":
        kw = dict(variant=self.variant, eta=self.eta, anchor=anchor,
                  denominator_mode=self.denominator_mode, reach_floor=self.reach_floor,
                  anchor_floor=self.anchor_floor)
        kw.update(changes)
        return TransformSpec(**kw)


def transformed_reward(spec: TransformSpec, game: GameTree, policy: Policy, h: int, a: int, i: int) -> float:
    """Transformed reward of player ``i`` for action ``a`` at history ``h``.

    Reference implementation evaluated one entry at a time; the dynamics use
    the vectorised :class:`TransformedReward`.
    """
    e = game.edge(h, a)
    base = float(game.edge_reward[e, i])
    actor = int(game.player[h])
    if spec.variant == "none" or actor == CHANCE:
        return base
    s = int(game.edge_slot[e])
    p = float(policy.probs[s])
    if not p > 0.0:
        raise DomainError(f"policy probability {p!r} at history {game.labels[h]!r} action {a} is not positive")
    ratio = math.log(p) - float(spec.log_anchor(game)[s])
    if spec.variant == "zerosum":
        return base - spec.eta * ratio if i == actor else base + spec.eta * ratio
    if i != actor:
        return base
    reach = reach_probs(game, policy)
    if spec.denominator_mode == "per_history":
        den = reach.others[actor, h]
    else:
        den = reach.info_others[game.history_infostate[h]]
    return base - spec.eta * ratio / max(den, spec.reach_floor)


class TransformedReward:
    """Vectorised transformed reward; probabilities are floored before the log."""

    def __init__(self, spec: TransformSpec, prob_floor: float = PROB_FLOOR):
        self.spec = spec
        self.prob_floor = prob_floor
        self.policy_dependent = spec.variant != "none"

    def __call__(self, game, policy, h, a):
        return self.table(game, policy)[game.edge(h, a)].copy()

    def table(self, game: GameTree, policy: Policy) -> np.ndarray:
        spec = self.spec
        if spec.variant == "none":
            return game.edge_reward
        reach = reach_probs(game, policy)
        args = kernel_args(game)
        return K.transform_rewards(game.edge_parent, game.edge_actor, game.edge_slot, args[5],
                                   game.history_infostate, reach.others, reach.info_others, policy.probs,
                                   spec.log_anchor(game), spec.variant_code, float(spec.eta), spec.den_code,
                                   float(spec.reach_floor), float(self.prob_floor))


def expected_penalty_decomposition(spec: TransformSpec, game: GameTree, policy: Policy,
                                   tol: float = 1e-10) -> np.ndarray:
    """Own-policy penalty T^i of the monotone transform for every player.

    Checks that the transformed root value equals the base root value minus
    T^i and raises :class:`ArithmeticError` otherwise.
    """
    if spec.variant != "monotone":
        raise UnsupportedError(f"penalty decomposition is defined for the monotone variant, not {spec.variant!r}")
    reach = reach_probs(game, policy)
    logr = np.log(np.maximum(policy.probs, PROB_FLOOR)) - spec.log_anchor(game)
    T = np.zeros(game.num_players)
    for info in game.infostates:
        kl = float(policy.probs[info.slots] @ logr[info.slots])
        hs = np.asarray(info.histories)
        own = reach.own[info.player, hs]
        cf = reach.others[info.player, hs]
        # equals the own reach of x whenever the denominator stays above the floor
        if spec.denominator_mode == "per_history":
            weight = float(own @ (cf / np.maximum(cf, spec.reach_floor)))
        else:
            weight = float(own @ cf) / max(reach.info_others[info.index], spec.reach_floor)
        T[info.player] += spec.eta * weight * kl
    base = value_tables(game, policy).root()
    transformed = value_tables(game, policy, TransformedReward(spec)).root()
    gap = np.max(np.abs(transformed - (base - T)))
    if gap > tol * max(1.0, np.max(np.abs(base))):
        raise ArithmeticError(f"penalty decomposition violated by {gap:.3g}")
    return T
