"""Follow-the-Regularized-Leader flow on information states.

Scores accumulate the counterfactual field ``rho^{-i}(x) Q^i(x, a)`` and the
policy is the blockwise mirror map of the scores. In ``bounded_w`` mode the
field is differenced against the first action of each infostate, which keeps
the scores bounded without changing the policy sequence (entropy case).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .diagnostics import DiagnosticsRecord, lyapunov_J, xi_divergence
from .errors import IntegrationError, SpecError, UnsupportedError
from .game import GameTree
from .policy import PROB_FLOOR, Policy
from .regularizers import ENTROPY, Regularizer, as_regularizer
from .transforms import TransformSpec
from .values import kernel_args, nash_conv, root_values

MODES = ("plain_y", "bounded_w")
METHODS = {"euler": K.METHOD_EULER, "heun": K.METHOD_HEUN, "rk4": K.METHOD_RK4}
DEFAULT_METHOD = "heun"
DEFAULT_STRIDE = 100


@dataclass(frozen=True)
class DynamicsState:
    scores: np.ndarray
    time: float
    mode: str
    policy: Policy
    step: int = 0

    @property
    def probs(self) -> np.ndarray:
        return self.policy.probs


@dataclass(frozen=True)
class EtaSchedule:
    """eta(t) = target + (start - target) * 2^(-t / half_life); constant when half_life is 0."""

    start: float
    target: float | None = None
    half_life: float = 0.0

    def __call__(self, t: float) -> float:
        if not self.half_life or self.target is None:
            return self.start
        return self.target + (self.start - self.target) * 2.0 ** (-t / self.half_life)


def _check_mode(mode):
    if mode not in MODES:
        raise SpecError(f"unknown dynamics mode {mode!r}; expected one of {MODES}")


def initial_state(game: GameTree, mode: str = "plain_y", regularizer: Regularizer = ENTROPY,
                  scores=None, policy: Policy | None = None) -> DynamicsState:
    """Zero scores (uniform policy under entropy) unless scores or an interior policy are given."""
    _check_mode(mode)
    reg = as_regularizer(regularizer)
    if policy is not None:
        if reg.kind != "entropy":
            raise UnsupportedError("starting from a policy needs the entropy regularizer")
        scores = np.log(np.maximum(policy.probs, PROB_FLOOR))
    y = np.zeros(game.num_slots) if scores is None else np.array(scores, dtype=float)
    if mode == "bounded_w":
        y = y - y[kernel_args(game)[10]]
    return DynamicsState(y, 0.0, mode, Policy(game, reg.mirror_all(game, y), copy=False))


def _params(spec: TransformSpec, reg: Regularizer, mode: str, eta: EtaSchedule | None = None,
            blend_t0: float = 0.0, blend_len: float = 0.0, prob_floor: float = PROB_FLOOR) -> tuple:
    eta = eta or EtaSchedule(float(spec.eta))
    return (float(reg.code), 1.0 if mode == "bounded_w" else 0.0, float(spec.variant_code),
            float(eta.start), float(eta.target if eta.target is not None else eta.start),
            float(eta.half_life or 0.0), float(blend_t0), float(blend_len),
            float(spec.den_code), float(spec.reach_floor), float(prob_floor))


def _raise_nonfinite(game, slot, step):
    info = game.infostates[game.slot_infostate[slot]]
    loc = (info.player, info.local, info.actions[game.slot_action[slot]])
    raise IntegrationError(
        f"non-finite field or scores at player {loc[0]} infostate {loc[1]} action {loc[2]!r}", step=step, location=loc)


def vector_field(game: GameTree, spec: TransformSpec, state: DynamicsState) -> np.ndarray:
    """Counterfactual field at the state's policy; a_x-differenced in bounded mode."""
    _check_mode(state.mode)
    args = kernel_args(game)
    g = K.counterfactual_field(args[0], args[1], args[2], args[3], args[4], args[5], args[6], args[7],
                               game.num_histories, game.num_infostates, state.policy.probs,
                               spec.log_anchor(game), spec.variant_code, float(spec.eta), spec.den_code,
                               float(spec.reach_floor), PROB_FLOOR)
    if state.mode == "bounded_w":
        g = g - g[args[10]]
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        _raise_nonfinite(game, int(bad[0]), state.step)
    return g


def _advance_state(game, state, y, dt, reg):
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        _raise_nonfinite(game, int(bad[0]), state.step + 1)
    return DynamicsState(y, state.time + dt, state.mode, Policy(game, reg.mirror_all(game, y), copy=False),
                         state.step + 1)


def _at(game, state, y, reg, dt_frac=0.0):
    return replace(state, scores=y, policy=Policy(game, reg.mirror_all(game, y), copy=False))


def euler_step(game: GameTree, spec: TransformSpec, state: DynamicsState, dt: float,
               regularizer: Regularizer = ENTROPY) -> DynamicsState:
    if not dt > 0:
        raise SpecError("dt must be positive")
    reg = as_regularizer(regularizer)
    g = vector_field(game, spec, state)
    return _advance_state(game, state, state.scores + dt * g, dt, reg)


def heun_step(game: GameTree, spec: TransformSpec, state: DynamicsState, dt: float,
              regularizer: Regularizer = ENTROPY) -> DynamicsState:
    """Second-order explicit Runge-Kutta (trapezoidal predictor-corrector)."""
    if not dt > 0:
        raise SpecError("dt must be positive")
    reg = as_regularizer(regularizer)
    k1 = vector_field(game, spec, state)
    k2 = vector_field(game, spec, _at(game, state, state.scores + dt * k1, reg))
    return _advance_state(game, state, state.scores + 0.5 * dt * (k1 + k2), dt, reg)


def rk4_step(game: GameTree, spec: TransformSpec, state: DynamicsState, dt: float,
             regularizer: Regularizer = ENTROPY) -> DynamicsState:
    if not dt > 0:
        raise SpecError("dt must be positive")
    reg = as_regularizer(regularizer)
    y = state.scores
    k1 = vector_field(game, spec, state)
    k2 = vector_field(game, spec, _at(game, state, y + 0.5 * dt * k1, reg))
    k3 = vector_field(game, spec, _at(game, state, y + 0.5 * dt * k2, reg))
    k4 = vector_field(game, spec, _at(game, state, y + dt * k3, reg))
    return _advance_state(game, state, y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), dt, reg)


STEPPERS = {"euler": euler_step, "heun": heun_step, "rk4": rk4_step}


@dataclass
class Trajectory:
    """Diagnostics sampled every ``stride`` steps plus per-step recurrence minima.

    ``chunk_min[k]`` is the smallest L1 distance to the initial policy over the
    steps of chunk ``k`` (ending at ``chunk_end[k]``), attained at step
    ``chunk_argmin[k]``. Chunks are the stride-sized pieces between samples.
    """

    records: list
    policies: list
    final: DynamicsState
    chunk_end: list = field(default_factory=list)
    chunk_min: list = field(default_factory=list)
    chunk_argmin: list = field(default_factory=list)
    aborted: bool = False
    error: str | None = None
    dt: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def min_distance_after(self, step0: int):
        """Per-step recurrence statistic: (min L1 distance to start, step) after ``step0``."""
        best, arg = math.inf, -1
        first = self.records[0].step if self.records else 0
        prev = first
        for end, d, s in zip(self.chunk_end, self.chunk_min, self.chunk_argmin):
            if prev >= first + step0 and d < best:
                best, arg = d, s
            prev = end
        return best, arg


def make_record(game: GameTree, state: DynamicsState, start: Policy, reg: Regularizer,
                reference: Policy | None = None, eta: float = math.nan,
                with_nashconv: bool = True) -> DiagnosticsRecord:
    pol = state.policy
    J = xi = math.nan
    if reference is not None:
        J = lyapunov_J(game, reference, state, reg)
        xi = xi_divergence(game, reference, pol)
    return DiagnosticsRecord(
        step=state.step, time=state.time,
        nashconv=nash_conv(game, pol) if with_nashconv else math.nan,
        values=tuple(root_values(game, pol)), J=J, xi_ref=xi,
        dist_to_start=pol.distance(start), eta=eta)


def run(game: GameTree, spec: TransformSpec, regularizer: Regularizer = ENTROPY, dt: float = 0.01,
        steps: int = 1000, stride: int = DEFAULT_STRIDE, method: str = DEFAULT_METHOD, mode: str = "plain_y",
        state: DynamicsState | None = None, reference: Policy | None = None,
        eta_schedule: EtaSchedule | None = None, callbacks: Sequence[Callable] = (),
        blend_from: Policy | None = None, blend_duration: float = 0.0,
        with_nashconv: bool = True, keep_policies: bool = True) -> Trajectory:
    """Integrate the flow for ``steps`` steps, sampling diagnostics every ``stride`` steps.

    Each callback is called as ``cb(state, record)`` at every sample. A
    non-finite field stops the run and returns the partial trajectory with
    ``aborted`` set.
    """
    if steps < 0:
        raise SpecError("steps must be non-negative")
    if not dt > 0:
        raise SpecError("dt must be positive")
    if stride < 1:
        raise SpecError("stride must be at least 1")
    if method not in METHODS:
        raise SpecError(f"unknown integrator {method!r}; expected one of {sorted(METHODS)}")
    reg = as_regularizer(regularizer)
    if state is None:
        state = initial_state(game, mode, reg)
    _check_mode(state.mode)
    eta_schedule = eta_schedule or EtaSchedule(float(spec.eta))
    args = kernel_args(game)
    log_new = np.ascontiguousarray(spec.log_anchor(game))
    log_old = np.log(np.maximum(blend_from.probs, PROB_FLOOR)) if blend_from is not None else log_new
    params = _params(spec, reg, state.mode, eta_schedule, 0.0, blend_duration if blend_from is not None else 0.0)
    start = state.policy
    t0 = state.time
    first_step = state.step

    def sample(st):
        eta_now = eta_schedule(st.time - t0) if spec.variant != "none" else math.nan
        rec = make_record(game, st, start, reg, reference, eta_now, with_nashconv)
        for cb in callbacks:
            cb(st, rec)
        return rec

    records = [sample(state)]
    policies = [start.probs.copy()] if keep_policies else []
    traj = Trajectory(records, policies, state, dt=dt)
    done = 0
    y, t = state.scores.copy(), state.time
    while done < steps:
        n = min(stride, steps - done)
        # the kernel measures eta and blending from the start of this run
        y_new, t_new, n_done, dmin, argmin, bad = K.advance(
            args, y, t - t0, n, float(dt), METHODS[method], params, log_old, log_new, start.probs)
        # time from the step count avoids accumulating rounding error
        t_new = t0 + (state.step + n_done - first_step) * dt
        if n_done:
            traj.chunk_end.append(state.step + n_done)
            traj.chunk_min.append(float(dmin))
            traj.chunk_argmin.append(state.step + int(argmin))
        y, t = y_new, t_new
        state = DynamicsState(y.copy(), float(t), state.mode, Policy(game, reg.mirror_all(game, y), copy=False),
                              state.step + int(n_done))
        if bad >= 0:
            info = game.infostates[game.slot_infostate[bad]]
            traj.aborted = True
            traj.error = (f"non-finite field or scores at step {state.step + 1}, player {info.player} "
                          f"infostate {info.local} action {info.actions[game.slot_action[bad]]!r}")
            break
        done += n
        records.append(sample(state))
        if keep_policies:
            policies.append(state.policy.probs.copy())
    traj.final = state
    return traj


def divergence_check(game: GameTree, spec: TransformSpec, state: DynamicsState, probe_eps: float = 1e-5):
    """Central finite-difference diagonal partials of the bounded field and their sum."""
    if state.mode != "bounded_w":
        raise UnsupportedError("divergence check needs bounded_w mode")
    if spec.variant != "none":
        raise UnsupportedError("divergence check needs a policy-independent reward (variant 'none')")
    reg = ENTROPY
    partials = np.zeros(game.num_slots)
    anchor_slot = kernel_args(game)[10]
    for s in range(game.num_slots):
        if anchor_slot[s] == s:
            continue
        e = np.zeros(game.num_slots)
        e[s] = probe_eps
        up = vector_field(game, spec, _at(game, state, state.scores + e, reg))[s]
        dn = vector_field(game, spec, _at(game, state, state.scores - e, reg))[s]
        partials[s] = (up - dn) / (2 * probe_eps)
    return partials, float(partials.sum())


def equivalence_check(game: GameTree, dt: float, steps: int, method: str = DEFAULT_METHOD,
                      scores=None, spec: TransformSpec | None = None) -> float:
    """Largest L1 policy gap between plain_y and bounded_w runs from matched starts."""
    spec = spec or TransformSpec("none")
    if spec.variant != "none":
        raise UnsupportedError("mode equivalence holds for policy-independent rewards only")
    plain = initial_state(game, "plain_y", ENTROPY, scores)
    bounded = initial_state(game, "bounded_w", ENTROPY, scores)
    args = kernel_args(game)
    logs = np.ascontiguousarray(spec.log_anchor(game))
    pp = _params(spec, ENTROPY, "plain_y")
    pb = _params(spec, ENTROPY, "bounded_w")
    y, w = plain.scores.copy(), bounded.scores.copy()
    worst = plain.policy.distance(bounded.policy)
    for _ in range(steps):
        y, _, _, _, _, bad1 = K.advance(args, y, 0.0, 1, float(dt), METHODS[method], pp, logs, logs, plain.probs)
        w, _, _, _, _, bad2 = K.advance(args, w, 0.0, 1, float(dt), METHODS[method], pb, logs, logs, plain.probs)
        if bad1 >= 0 or bad2 >= 0:
            raise IntegrationError("non-finite field during equivalence check")
        p = K.mirror(y, args[8], args[9], K.REG_ENTROPY)
        q = K.mirror(w, args[8], args[9], K.REG_ENTROPY)
        worst = max(worst, float(np.abs(p - q).sum()))
    return worst
