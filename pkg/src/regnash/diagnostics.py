"""Lyapunov quantities, divergences, rate fits, recurrence and CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import numpy as np
from scipy.special import softmax, xlogy

from .errors import FitError, IncompletePolicyError
from .game import GameTree
from .policy import Policy
from .regularizers import ENTROPY, Regularizer
from .values import reach_probs


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    time: float
    nashconv: float
    values: tuple
    J: float = math.nan
    xi_ref: float = math.nan
    dist_to_start: float = 0.0
    eta: float = math.nan


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    t_start: float
    t_end: float
    residual: float
    samples: int
    zeta: float = math.nan


def kl(p, q) -> float:
    """KL(p || q) with natural log and 0 log 0 = 0; inf if q vanishes on p's support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) & (p > 0)):
        return math.inf
    return float(xlogy(p, p).sum() - xlogy(p, q).sum())


def lyapunov_J(game: GameTree, reference: Policy, state, regularizer: Regularizer = ENTROPY) -> float:
    """Sum over infostates of rho^{ref^i}(x) [phi*(y_x) - <ref_x, y_x>].

    ``state`` is a dynamics state or a raw score vector.
    """
    if reference.game is not game and reference.probs.shape != (game.num_slots,):
        raise IncompletePolicyError("reference policy does not match the game")
    y = np.asarray(getattr(state, "scores", state), dtype=float)
    own = reach_probs(game, reference).info_own
    total = 0.0
    for info in game.infostates:
        w = own[info.index]
        if w == 0.0:
            continue
        yx = y[info.slots]
        total += w * (regularizer.conjugate(yx) - float(reference.probs[info.slots] @ yx))
    return total


def bregman_sum(game: GameTree, reference: Policy, state, regularizer: Regularizer = ENTROPY) -> float:
    """Sum over infostates of rho^{ref^i}(x) D_phi(ref_x, Gamma(y_x))."""
    y = np.asarray(getattr(state, "scores", state), dtype=float)
    own = reach_probs(game, reference).info_own
    return sum(own[x.index] * regularizer.bregman(reference.probs[x.slots], regularizer.mirror(y[x.slots]))
               for x in game.infostates if own[x.index] > 0)


def xi_divergence(game: GameTree, mu: Policy, pi: Policy, weighting: str = "infostate") -> float:
    """Reach-weighted KL of ``pi`` from ``mu`` over every player's infostates.

    ``weighting="infostate"`` weights each infostate once by mu's own reach;
    ``"history"`` weights it by the summed own reach of its member histories.
    """
    if weighting not in ("infostate", "history"):
        raise ValueError(f"unknown weighting {weighting!r}")
    reach = reach_probs(game, mu)
    total = 0.0
    for info in game.infostates:
        if weighting == "infostate":
            w = reach.info_own[info.index]
        else:
            w = float(reach.own[info.player, list(info.histories)].sum())
        if w == 0.0:
            continue
        d = kl(mu.probs[info.slots], pi.probs[info.slots])
        if math.isinf(d):
            return math.inf
        total += w * d
    return total


def fit_decay_rate(data, window: tuple | None = None, transient: float = 0.2, eta: float | None = None,
                   column: str = "xi_ref") -> RateFit:
    """Least-squares slope of log(xi) against time.

    ``data`` is a trajectory, a sequence of records or a ``(times, values)``
    pair. The first ``transient`` fraction of the window is discarded.
    """
    if isinstance(data, tuple) and len(data) == 2:
        t, v = (np.asarray(a, dtype=float) for a in data)
    else:
        recs = getattr(data, "records", data)
        t = np.array([r.time for r in recs], dtype=float)
        v = np.array([getattr(r, column) for r in recs], dtype=float)
    lo, hi = window if window is not None else (t.min(initial=0.0), t.max(initial=0.0))
    sel = (t >= lo) & (t <= hi)
    t, v = t[sel], v[sel]
    if t.size:
        cut = lo + transient * (hi - lo)
        keep = t >= cut
        t, v = t[keep], v[keep]
    if t.size < 3:
        raise FitError(f"need at least 3 samples to fit a rate, got {t.size}")
    if np.any(~(v > 0)):
        raise FitError("rate fit needs strictly positive samples")
    y = np.log(v)
    A = np.vstack([t, np.ones_like(t)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(res[0] / t.size)) if res.size else 0.0
    zeta = -slope / eta if eta else math.nan
    return RateFit(float(slope), float(intercept), float(t[0]), float(t[-1]), resid, int(t.size), zeta)


def recurrence_stat(policies, times, t0: float):
    """Minimum L1 distance to the first profile among samples after ``t0``.

    Returns ``(distance, time)``.
    """
    P = np.asarray(policies, dtype=float)
    times = np.asarray(times, dtype=float)
    after = np.flatnonzero(times >= t0)
    if after.size == 0:
        raise ValueError("no samples after t0")
    d = np.abs(P[after] - P[0]).sum(axis=1)
    k = int(np.argmin(d))
    return float(d[k]), float(times[after[k]])


def matrix_qre(A, eta: float, mu1=None, mu2=None, damping: float = 0.5, tol: float = 1e-12,
               max_iter: int = 100_000, x0=None):
    """Equilibrium of the entropy-regularised matrix game anchored at (mu1, mu2).

    Damped fixed-point iteration p <- (1-d) p + d * normalize(mu1 * exp(A q / eta))
    and likewise for q with -A^T p. The damping is halved whenever a sweep
    fails to converge. Returns ``(p, q, iterations, damping_used)``.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    lmu1 = np.log(np.full(m, 1.0 / m) if mu1 is None else np.asarray(mu1, dtype=float))
    lmu2 = np.log(np.full(n, 1.0 / n) if mu2 is None else np.asarray(mu2, dtype=float))
    d = damping
    while d > 1e-6:
        if x0 is None:
            p, q = np.exp(lmu1), np.exp(lmu2)
        else:
            p, q = (np.array(v, dtype=float) for v in x0)
        for it in range(max_iter):
            p_new = (1 - d) * p + d * softmax(lmu1 + A @ q / eta)
            q_new = (1 - d) * q + d * softmax(lmu2 - A.T @ p / eta)
            change = np.abs(p_new - p).sum() + np.abs(q_new - q).sum()
            p, q = p_new, q_new
            if change < tol:
                return p, q, it + 1, d
            if not np.all(np.isfinite(p)):
                break
        d *= 0.5
    raise ArithmeticError("damped fixed-point iteration did not converge")


# ------------------------------------------------------------------- CSV
TRAJECTORY_COLUMNS = (
    ("step", "integration step index"),
    ("time", "continuous time t = step * dt"),
    ("nashconv", "NashConv of the current policy against the base reward"),
    ("value_p1", "root value of player 1 under the base reward"),
    ("J", "Lyapunov function J(y) against the reference policy (nan without reference)"),
    ("xi_ref", "reach-weighted KL Xi(reference, policy) (nan without reference)"),
    ("policy_dist_to_start", "L1 distance of the policy profile to the initial profile"),
    ("eta", "effective regularisation strength at this time"),
)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def trajectory_rows(records: Iterable[DiagnosticsRecord]):
    for r in records:
        yield [r.step, r.time, r.nashconv, r.values[0] if len(r.values) else math.nan,
               r.J, r.xi_ref, r.dist_to_start, r.eta]


def write_csv(stream, columns: Sequence, rows: Iterable, summary: dict | None = None, comments=()) -> None:
    """CSV with ``#`` comment lines documenting every column and ``#summary`` rows at the end."""
    for c in comments:
        stream.write(f"# {c}\n")
    for name, doc in columns:
        stream.write(f"# {name}: {doc}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow([name for name, _ in columns])
    for row in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    for key, value in (summary or {}).items():
        stream.write(f"#summary,{key},{value if isinstance(value, str) else _fmt(value)}\n")


def trajectory_csv(trajectory, summary: dict | None = None, comments=()) -> str:
    buf = io.StringIO()
    write_csv(buf, TRAJECTORY_COLUMNS, trajectory_rows(trajectory.records), summary, comments)
    return buf.getvalue()


def read_csv(path_or_text: str):
    """Parse a CSV written by :func:`write_csv` into (header, rows, summary)."""
    text = path_or_text
    if "\n" not in path_or_text:
        with open(path_or_text) as fh:
            text = fh.read()
    header, rows, summary = None, [], {}
    for line in text.splitlines():
        if line.startswith("#summary,"):
            _, key, value = line.split(",", 2)
            summary[key] = value
        elif line.startswith("#") or not line:
            continue
        elif header is None:
            header = line.split(",")
        else:
            rows.append([float(v) for v in line.split(",")])
    return header, np.array(rows), summary


def record_fields() -> list[str]:
    return [f.name for f in fields(DiagnosticsRecord)]
