"""Compiled tree sweeps and the fused FoReL integrator.

Everything here works on the flat arrays of :class:`GameTree`. Edges are in
history preorder, so a forward loop over edges sees parents before children
and a reverse loop sees children before parents.
"""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

VARIANT_NONE, VARIANT_MONOTONE, VARIANT_ZEROSUM = 0, 1, 2
DEN_HISTORY, DEN_INFOSTATE = 0, 1
REG_ENTROPY, REG_L2 = 0, 1
METHOD_EULER, METHOD_HEUN, METHOD_RK4 = 1, 2, 4


@njit(cache=True)
def edge_probs(edge_actor, edge_slot, edge_chance_prob, probs):
    E = edge_actor.shape[0]
    out = np.empty(E)
    for e in range(E):
        if edge_actor[e] < 0:
            out[e] = edge_chance_prob[e]
        else:
            out[e] = probs[edge_slot[e]]
    return out


@njit(cache=True)
def forward(edge_parent, edge_child, edge_actor, eprob, num_players, num_histories):
    """Reach probabilities: own (N,H), others incl. chance (N,H), total (H)."""
    own = np.ones((num_players, num_histories))
    others = np.ones((num_players, num_histories))
    total = np.ones(num_histories)
    for e in range(edge_parent.shape[0]):
        h = edge_parent[e]
        c = edge_child[e]
        p = eprob[e]
        actor = edge_actor[e]
        total[c] = total[h] * p
        for i in range(num_players):
            if actor == i:
                own[i, c] = own[i, h] * p
                others[i, c] = others[i, h]
            else:
                own[i, c] = own[i, h]
                others[i, c] = others[i, h] * p
    return own, others, total


@njit(cache=True)
def backward(edge_parent, edge_child, eprob, reward, num_histories):
    """History values V (N,H) and edge values Q (E,N) for the given edge rewards."""
    E, N = reward.shape
    V = np.zeros((N, num_histories))
    Q = np.empty((E, N))
    for e in range(E - 1, -1, -1):
        h = edge_parent[e]
        c = edge_child[e]
        for i in range(N):
            q = reward[e, i] + V[i, c]
            Q[e, i] = q
            V[i, h] += eprob[e] * q
    return V, Q


@njit(cache=True)
def infostate_reach(history_infostate, info_player, others, num_infostates):
    """Counterfactual reach of each infostate for its owner."""
    out = np.zeros(num_infostates)
    for h in range(history_infostate.shape[0]):
        x = history_infostate[h]
        if x >= 0:
            out[x] += others[info_player[x], h]
    return out


@njit(cache=True)
def transform_rewards(edge_parent, edge_actor, edge_slot, edge_reward, history_infostate,
                      others, cfx, probs, log_anchor, variant, eta, den_mode, reach_floor, prob_floor):
    """Edge reward table under the log-ratio transformation (chance edges untouched)."""
    E, N = edge_reward.shape
    out = edge_reward.copy()
    if variant == VARIANT_NONE:
        return out
    for e in range(E):
        actor = edge_actor[e]
        if actor < 0:
            continue
        s = edge_slot[e]
        lr = math.log(max(probs[s], prob_floor)) - log_anchor[s]
        if variant == VARIANT_MONOTONE:
            if den_mode == DEN_HISTORY:
                den = others[actor, edge_parent[e]]
            else:
                den = cfx[history_infostate[edge_parent[e]]]
            out[e, actor] -= eta * lr / max(den, reach_floor)
        else:
            for i in range(N):
                if i == actor:
                    out[e, i] -= eta * lr
                else:
                    out[e, i] += eta * lr
    return out


@njit(cache=True)
def counterfactual_field(edge_parent, edge_child, edge_actor, edge_slot, edge_chance_prob, edge_reward,
                         history_infostate, info_player, num_histories, num_infostates, probs,
                         log_anchor, variant, eta, den_mode, reach_floor, prob_floor):
    """g(x,a) = sum_{h in x} rho^{-i}(h) Q^i(h,a) for the owner i of x, per slot."""
    N = edge_reward.shape[1]
    eprob = edge_probs(edge_actor, edge_slot, edge_chance_prob, probs)
    own, others, total = forward(edge_parent, edge_child, edge_actor, eprob, N, num_histories)
    cfx = infostate_reach(history_infostate, info_player, others, num_infostates)
    rew = transform_rewards(edge_parent, edge_actor, edge_slot, edge_reward, history_infostate,
                            others, cfx, probs, log_anchor, variant, eta, den_mode, reach_floor, prob_floor)
    V, Q = backward(edge_parent, edge_child, eprob, rew, num_histories)
    g = np.zeros(probs.shape[0])
    for e in range(edge_parent.shape[0]):
        actor = edge_actor[e]
        if actor >= 0:
            g[edge_slot[e]] += others[actor, edge_parent[e]] * Q[e, actor]
    return g


@njit(cache=True)
def _project_simplex(v):
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = 0.0
    theta = 0.0
    for k in range(n):
        css += u[k]
        t = (css - 1.0) / (k + 1)
        if u[k] - t > 0:
            theta = t
    out = np.empty(n)
    for k in range(n):
        out[k] = max(v[k] - theta, 0.0)
    return out


@njit(cache=True)
def mirror(scores, info_start, info_len, reg):
    """Blockwise mirror map: softmax (entropy) or projection of y/2 (l2)."""
    out = np.empty_like(scores)
    for x in range(info_start.shape[0]):
        s0 = info_start[x]
        n = info_len[x]
        if reg == REG_ENTROPY:
            m = scores[s0]
            for k in range(1, n):
                m = max(m, scores[s0 + k])
            z = 0.0
            for k in range(n):
                v = math.exp(scores[s0 + k] - m)
                out[s0 + k] = v
                z += v
            for k in range(n):
                out[s0 + k] /= z
        else:
            p = _project_simplex(scores[s0:s0 + n] * 0.5)
            for k in range(n):
                out[s0 + k] = p[k]
    return out


@njit(cache=True)
def _field(g_args, scores, t, params, log_old, log_new):
    (edge_parent, edge_child, edge_actor, edge_slot, edge_chance_prob, edge_reward,
     history_infostate, info_player, info_start, info_len, slot_first) = g_args
    (reg, bounded, variant, eta0, eta_target, half_life, blend_t0, blend_len,
     den_mode, reach_floor, prob_floor) = params
    probs = mirror(scores, info_start, info_len, int(reg))
    if half_life > 0.0 and math.isfinite(half_life):
        eta = eta_target + (eta0 - eta_target) * 2.0 ** (-t / half_life)
    else:
        eta = eta0
    if blend_len > 0.0:
        lam = min(max((t - blend_t0) / blend_len, 0.0), 1.0)
        log_anchor = (1.0 - lam) * log_old + lam * log_new
    else:
        log_anchor = log_new
    g = counterfactual_field(edge_parent, edge_child, edge_actor, edge_slot, edge_chance_prob, edge_reward,
                             history_infostate, info_player, edge_parent.shape[0] + 1, info_start.shape[0],
                             probs, log_anchor, int(variant), eta, int(den_mode), reach_floor, prob_floor)
    if bounded:
        out = np.empty_like(g)
        for s in range(g.shape[0]):
            out[s] = g[s] - g[slot_first[s]]
        return out
    return g


@njit(cache=True)
def field_at(g_args, scores, t, params, log_old, log_new):
    return _field(g_args, scores, t, params, log_old, log_new)


@njit(cache=True)
def advance(g_args, scores, t, steps, dt, method, params, log_old, log_new, ref_probs):
    """Integrate ``steps`` steps in place of a Python loop.

    Returns (scores, t, steps_done, min_dist, min_step, bad_slot). ``min_dist``
    is the smallest L1 distance of the policy after each step to ``ref_probs``;
    ``bad_slot`` is -1 unless a non-finite field entry or score stopped the run.
    """
    info_start, info_len = g_args[8], g_args[9]
    y = scores.copy()
    min_dist = np.inf
    min_step = -1
    for n in range(steps):
        k1 = _field(g_args, y, t, params, log_old, log_new)
        if method == METHOD_EULER:
            inc = dt * k1
        elif method == METHOD_HEUN:
            k2 = _field(g_args, y + dt * k1, t + dt, params, log_old, log_new)
            inc = 0.5 * dt * (k1 + k2)
        else:
            k2 = _field(g_args, y + 0.5 * dt * k1, t + 0.5 * dt, params, log_old, log_new)
            k3 = _field(g_args, y + 0.5 * dt * k2, t + 0.5 * dt, params, log_old, log_new)
            k4 = _field(g_args, y + dt * k3, t + dt, params, log_old, log_new)
            inc = dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for s in range(inc.shape[0]):
            if not math.isfinite(inc[s]) or not math.isfinite(y[s] + inc[s]):
                return y, t, n, min_dist, min_step, s
        y += inc
        t += dt
        p = mirror(y, info_start, info_len, int(params[0]))
        d = 0.0
        for s in range(p.shape[0]):
            d += abs(p[s] - ref_probs[s])
        if d < min_dist:
            min_dist = d
            min_step = n + 1
    return y, t, steps, min_dist, min_step, -1
