"""Iterated anchoring: solve the transformed game, re-anchor at the solution, repeat."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import xi_divergence
from .dynamics import DEFAULT_METHOD, DynamicsState, initial_state, run
from .errors import DomainError, IntegrationError, SpecError
from .game import GameTree
from .policy import EPS_INTERIOR, PROB_FLOOR, Policy
from .regularizers import ENTROPY, Regularizer, as_regularizer
from .transforms import TransformedReward, TransformSpec
from .values import nash_conv, reach_probs, root_values, value_tables

INTERPOLATIONS = ("hard", "linear_half")
# the penalty contributes eigenvalues of order -eta / reach; explicit schemes need dt * |lambda| of order 1
STIFF_LIMIT = 2.0


@dataclass(frozen=True)
class AnchorSchedule:
    steps_per_anchor: int
    anchors: int
    interpolation: str = "hard"

    def __post_init__(self):
        if self.steps_per_anchor < 1 or self.anchors < 1:
            raise SpecError("steps_per_anchor and anchors must be at least 1")
        if self.interpolation not in INTERPOLATIONS:
            raise SpecError(f"unknown interpolation {self.interpolation!r}")


@dataclass(frozen=True)
class AnchorDecomposition:
    m: np.ndarray
    delta: np.ndarray
    kappa: np.ndarray
    xi_ref_k: float
    xi_ref_prev: float
    xi_step: float
    residual: float

    @property
    def lhs(self) -> float:
        return self.xi_ref_k - self.xi_ref_prev


@dataclass
class AnchorStep:
    k: int
    policy: Policy
    nashconv: float
    residual: float
    decomposition: AnchorDecomposition | None = None
    xi_ref: float = math.nan
    xi_step: float = math.nan


@dataclass
class SolveResult:
    policy: Policy
    residual: float
    state: DynamicsState
    aborted: bool = False


def solve_transformed(game: GameTree, eta: float, anchor: Policy, regularizer: Regularizer = ENTROPY,
                      dt: float = 0.01, budget: int = 10_000, method: str = DEFAULT_METHOD,
                      state: DynamicsState | None = None, variant: str = "monotone",
                      denominator_mode: str = "per_infostate", blend_from: Policy | None = None,
                      blend_duration: float = 0.0, early_exit: float | None = None,
                      anchor_floor: float = EPS_INTERIOR) -> SolveResult:
    """Run the transformed dynamics anchored at ``anchor`` for ``budget`` steps.

    The residual is the L1 policy change over the last 1% of the steps. With
    ``early_exit`` set, the solve stops once the change over a 1% chunk falls
    below it. Anchors produced by :func:`iterate_anchors` only carry the 1e-12
    snapshot floor, so that loop passes ``anchor_floor=PROB_FLOOR``.
    """
    if not anchor.is_interior(anchor_floor):
        raise DomainError(f"anchor policy must be interior (all probabilities >= {anchor_floor})")
    if dt * eta > STIFF_LIMIT:
        warnings.warn(f"dt * eta = {dt * eta:.3g} exceeds {STIFF_LIMIT}; the explicit integrator is likely "
                      "unstable on the penalty term, reduce dt", RuntimeWarning, stacklevel=2)
    reg = as_regularizer(regularizer)
    spec = TransformSpec(variant, eta=eta, anchor=anchor, denominator_mode=denominator_mode,
                         anchor_floor=anchor_floor)
    if state is None:
        state = initial_state(game, "plain_y", reg)
    if budget == 0:
        return SolveResult(state.policy, 0.0, state)
    chunk = max(1, budget // 100)
    done, residual = 0, math.inf
    while done < budget:
        n = min(chunk, budget - done)
        blend_left = max(blend_duration - done * dt, 0.0) if blend_from is not None else 0.0
        prev = state.policy
        if blend_left > 0:
            # re-express the blend relative to the start of this chunk
            lam0 = 1.0 - blend_left / blend_duration
            log_old = (1 - lam0) * np.log(np.maximum(blend_from.probs, PROB_FLOOR)) + lam0 * np.log(anchor.probs)
            traj = run(game, spec, reg, dt, n, stride=n, method=method, state=state,
                       blend_from=Policy(game, np.exp(log_old), copy=False), blend_duration=blend_left,
                       with_nashconv=False, keep_policies=False)
        else:
            traj = run(game, spec, reg, dt, n, stride=n, method=method, state=state,
                       with_nashconv=False, keep_policies=False)
        state = traj.final
        if traj.aborted:
            raise IntegrationError(f"transformed dynamics diverged: {traj.error}", step=state.step)
        done += n
        residual = state.policy.distance(prev)
        if early_exit is not None and residual < early_exit and blend_left <= n * dt:
            break
    return SolveResult(state.policy, residual, state)


def iterate_anchors(game: GameTree, eta: float, schedule: AnchorSchedule, regularizer: Regularizer = ENTROPY,
                    dt: float = 0.01, method: str = DEFAULT_METHOD, reference: Policy | None = None,
                    denominator_mode: str = "per_infostate", warm_start: bool = True,
                    early_exit: float | None = None, callback=None) -> list:
    """Anchor sequence pi_0 = uniform, pi_k = solution anchored at pi_{k-1}.

    Each entry records NashConv of pi_k against the base reward. With a
    ``reference`` equilibrium the Xi terms and decomposition are recorded too.
    """
    reg = as_regularizer(regularizer)
    prev = Policy.uniform(game)
    older = None
    steps = [AnchorStep(0, prev, nash_conv(game, prev), 0.0,
                        xi_ref=xi_divergence(game, reference, prev) if reference is not None else math.nan)]
    state = initial_state(game, "plain_y", reg)
    half = 0.5 * schedule.steps_per_anchor * dt
    for k in range(1, schedule.anchors + 1):
        blend = older if schedule.interpolation == "linear_half" and older is not None else None
        res = solve_transformed(game, eta, prev, reg, dt, schedule.steps_per_anchor, method,
                                state=state if warm_start else None, denominator_mode=denominator_mode,
                                blend_from=blend, blend_duration=half if blend is not None else 0.0,
                                early_exit=early_exit, anchor_floor=PROB_FLOOR)
        cur = res.policy.floored(PROB_FLOOR)
        entry = AnchorStep(k, cur, nash_conv(game, cur), res.residual, xi_step=xi_divergence(game, cur, prev))
        if reference is not None:
            entry.xi_ref = xi_divergence(game, reference, cur)
            entry.decomposition = lemma6_decomposition(game, eta, reference, prev, cur,
                                                       denominator_mode=denominator_mode, check=False)
        steps.append(entry)
        if callback is not None:
            callback(entry)
        older, prev, state = prev, cur, res.state
    return steps


def lemma6_decomposition(game: GameTree, eta: float, pstar: Policy, prev: Policy, cur: Policy,
                         denominator_mode: str = "per_infostate", check: bool = True) -> AnchorDecomposition:
    """Terms of the anchor-step identity for reference ``pstar``.

    The left side comes from KL divergences and the right side from value
    tables, so the residual compares two independent computations. Xi is
    weighted per infostate for the per-infostate denominator and per history
    for the per-history one.
    """
    if check:
        for name, pol in (("pi*", pstar), ("pi_{k-1}", prev), ("pi_k", cur)):
            if not pol.is_interior(EPS_INTERIOR):
                raise DomainError(f"{name} is not interior")
    weighting = "infostate" if denominator_mode == "per_infostate" else "history"
    N = game.num_players
    m = np.zeros(N)
    delta = np.zeros(N)
    kappa = np.zeros(N)
    v_cur = root_values(game, cur)
    v_star = root_values(game, pstar)
    spec = TransformSpec("monotone", eta=eta, anchor=prev, denominator_mode=denominator_mode,
                         anchor_floor=PROB_FLOOR)
    kvt = value_tables(game, cur, TransformedReward(spec))
    star_own = reach_probs(game, pstar)
    for i in range(N):
        others = [j for j in range(N) if j != i]
        v_dev = root_values(game, cur.mix(pstar, [i]))[i]        # (pi*^i, pi_k^{-i})
        v_cross = root_values(game, cur.mix(pstar, others))[i]   # (pi_k^i, pi*^{-i})
        m[i] = v_cur[i] - v_dev - v_cross + v_star[i]
        delta[i] = v_cross - v_star[i]
    for info in game.infostates:
        i = info.player
        # kappa weights by the own reach of x under either denominator
        w = star_own.info_own[info.index]
        diff = pstar.probs[info.slots] - cur.probs[info.slots]
        kappa[i] += w * kvt.reach.info_others[info.index] * float(diff @ kvt.info_Q[info.slots])
    xi_k = xi_divergence(game, pstar, cur, weighting)
    xi_prev = xi_divergence(game, pstar, prev, weighting)
    xi_step = xi_divergence(game, cur, prev, weighting)
    rhs = -xi_step + (m.sum() + delta.sum() + kappa.sum()) / eta
    return AnchorDecomposition(m, delta, kappa, xi_k, xi_prev, xi_step, float((xi_k - xi_prev) - rhs))


def kl_contraction_check(game: GameTree, pstar: Policy, sequence) -> np.ndarray:
    """Per-step margins Xi(pi*, pi_k) - Xi(pi*, pi_{k-1}) + Xi(pi_k, pi_{k-1})."""
    pols = [getattr(p, "policy", p) for p in sequence]
    out = []
    for prev, cur in zip(pols[:-1], pols[1:]):
        out.append(xi_divergence(game, pstar, cur) - xi_divergence(game, pstar, prev)
                   + xi_divergence(game, cur, prev))
    return np.array(out)
