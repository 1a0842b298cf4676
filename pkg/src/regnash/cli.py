"""Command-line experiment runner: ``run``, ``sweep`` and ``validate-game``."""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .anchoring import AnchorSchedule, iterate_anchors
from .config import DOCS, KEYS, RunConfig, dumps_config, parse_config, with_values
from .diagnostics import FitError, fit_decay_rate, matrix_qre, write_csv
from .diagnostics import TRAJECTORY_COLUMNS, trajectory_rows
from .dynamics import EtaSchedule, initial_state, run
from .errors import ConfigError, InvalidGameError, NumericError, RegNashError
from .game import validate
from .games import kuhn_equilibrium, make_game, matrix_nash, matrix_payoff
from .policy import Policy, read_policy, write_policy
from .transforms import TransformSpec

FIT_FLOOR = 1e-10
EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

ANCHOR_COLUMNS = (
    ("k", "anchor index (0 is the uniform start)"),
    ("nashconv_base", "NashConv of pi_k against the base reward"),
    ("xi_to_ref", "Xi(reference, pi_k) (nan without reference)"),
    ("xi_step", "Xi(pi_k, pi_{k-1})"),
    ("sum_m", "sum over players of the monotonicity term m_k"),
    ("sum_delta", "sum over players of delta_k"),
    ("sum_kappa", "sum over players of kappa_k"),
    ("identity_residual", "residual of the anchor-step identity"),
)


def _reference(cfg: RunConfig, game):
    if cfg.reference is None:
        return None
    if cfg.reference == "nash" and game.name == "kuhn_poker":
        return kuhn_equilibrium(game)
    if cfg.reference in ("nash", "qre"):
        try:
            A = matrix_payoff(game)
        except InvalidGameError:
            raise ConfigError(f"reference={cfg.reference} needs a matrix game", key="reference") from None
        if cfg.reference == "nash":
            p, q, _ = matrix_nash(A)
        else:
            if cfg.transform == "none":
                raise ConfigError("reference=qre needs a transform", key="reference")
            p, q, *_ = matrix_qre(A, cfg.eta)
        return Policy(game, np.r_[p, q])
    if not os.path.exists(cfg.reference):
        raise ConfigError(f"reference policy file {cfg.reference!r} not found", key="reference")
    return read_policy(cfg.reference, game)


def _stem(path):
    return path[:-4] if path.endswith(".csv") else path


def run_experiment(cfg: RunConfig, stream=None) -> int:
    """Execute one configured experiment and write its CSV. Returns an exit status."""
    log = stream or sys.stderr
    try:
        game = make_game(cfg.game)
    except (InvalidGameError, OSError) as exc:
        print(f"error: game: {exc}", file=log)
        return EXIT_USAGE
    problems = validate(game)
    if problems:
        print(f"error: game {cfg.game!r} is invalid: {problems[0]}", file=log)
        return EXIT_USAGE
    try:
        reference = _reference(cfg, game)
    except ConfigError as exc:
        print(f"error: {exc}", file=log)
        return EXIT_USAGE
    comments = ["config " + line for line in dumps_config(cfg).splitlines()]
    if cfg.anchor_every:
        return _run_anchoring(cfg, game, reference, comments, log)
    return _run_plain(cfg, game, reference, comments, log)


def _run_plain(cfg, game, reference, comments, log) -> int:
    anchor = None
    if cfg.anchor is not None:
        if not os.path.exists(cfg.anchor):
            print(f"error: anchor policy file {cfg.anchor!r} not found", file=log)
            return EXIT_USAGE
        anchor = read_policy(cfg.anchor, game)
    spec = TransformSpec(cfg.transform, eta=cfg.eta, anchor=anchor, denominator_mode=cfg.denominator,
                         reach_floor=cfg.reach_floor)
    if cfg.seed is not None:
        start = Policy.random(game, np.random.default_rng(cfg.seed), floor=1e-3)
        state = initial_state(game, cfg.mode, cfg.regularizer, policy=start)
    else:
        state = initial_state(game, cfg.mode, cfg.regularizer)
    schedule = EtaSchedule(cfg.eta, cfg.eta_decay_target, cfg.eta_half_life)
    callbacks = []
    if cfg.snapshot_every:
        def snapshot(st, rec):
            if st.step % cfg.snapshot_every == 0:
                write_policy(st.policy, f"{_stem(cfg.out)}.step{st.step}.policy")
        callbacks.append(snapshot)
    traj = run(game, spec, cfg.regularizer, cfg.dt, cfg.steps, stride=cfg.stride, method=cfg.integrator,
               state=state, reference=reference, eta_schedule=schedule, callbacks=callbacks)
    summary = {"aborted": int(traj.aborted)}
    if traj.aborted:
        summary["error"] = traj.error.replace(",", ";")
    quarter = cfg.steps // 4
    d, s = traj.min_distance_after(quarter)
    summary["recurrence_min_dist_after_quarter"] = d
    summary["recurrence_argmin_step"] = s
    summary["nashconv_min"] = float(np.min(traj.column("nashconv")))
    summary["nashconv_final"] = traj.records[-1].nashconv
    if reference is not None:
        J = traj.column("J")
        summary["J_max_drift"] = float(np.max(np.abs(J - J[0])))
    if reference is not None and cfg.transform != "none":
        try:
            # stop the window once xi has decayed into rounding noise
            t, xi = traj.column("time"), traj.column("xi_ref")
            resolved = np.flatnonzero(xi > FIT_FLOOR)
            end = t[resolved[-1]] if resolved.size else t[0]
            fit = fit_decay_rate(traj, window=(t[0], end), eta=cfg.eta)
            summary["rate_slope"] = fit.slope
            summary["rate_residual"] = fit.residual
        except FitError as exc:
            summary["rate_fit"] = str(exc).replace(",", ";")
    with open(cfg.out, "w") as fh:
        write_csv(fh, TRAJECTORY_COLUMNS, trajectory_rows(traj.records), summary, comments)
    if cfg.policy_out:
        write_policy(traj.final.policy, cfg.policy_out)
    if traj.aborted:
        print(f"error: {traj.error}", file=log)
        return EXIT_NUMERIC
    return EXIT_OK


def _run_anchoring(cfg, game, reference, comments, log) -> int:
    schedule = AnchorSchedule(cfg.anchor_every, cfg.anchors, cfg.interpolation)
    rows = []

    def row(entry):
        dec = entry.decomposition
        nan = math.nan
        rows.append([entry.k, entry.nashconv, entry.xi_ref, entry.xi_step,
                     dec.m.sum() if dec else nan, dec.delta.sum() if dec else nan,
                     dec.kappa.sum() if dec else nan, dec.residual if dec else nan])

    summary = {"aborted": 0}
    status = EXIT_OK
    try:
        seq = iterate_anchors(game, cfg.eta, schedule, cfg.regularizer, cfg.dt, cfg.integrator,
                              reference=reference, denominator_mode=cfg.denominator,
                              callback=lambda e: row(e) if e.k > 0 else None)
        first = seq[0]
        rows.insert(0, [0, first.nashconv, first.xi_ref, math.nan, math.nan, math.nan, math.nan, math.nan])
        summary["nashconv_final"] = seq[-1].nashconv
        summary["nashconv_min"] = min(s.nashconv for s in seq)
        if cfg.policy_out:
            write_policy(seq[-1].policy, cfg.policy_out)
    except (NumericError, ArithmeticError) as exc:
        summary["aborted"] = 1
        summary["error"] = str(exc).replace(",", ";")
        print(f"error: {exc}", file=log)
        status = EXIT_NUMERIC
    with open(cfg.out, "w") as fh:
        write_csv(fh, ANCHOR_COLUMNS, rows, summary, comments)
    return status


# ------------------------------------------------------------------ argparse
def _add_keys(p):
    p.add_argument("config", nargs="?", help="flat key=value config file")
    for key in KEYS:
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="VALUE", help=DOCS.get(key))


def _overrides(ns) -> dict:
    return {k: getattr(ns, k) for k in KEYS if getattr(ns, k, None) is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regnash", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment")
    _add_keys(p_run)
    p_sweep = sub.add_parser("sweep", help="run one experiment per value of a key")
    _add_keys(p_sweep)
    p_sweep.add_argument("--sweep-key", default="eta", help="configuration key to vary (default eta)")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p_val = sub.add_parser("validate-game", help="check a game's structural assumptions")
    p_val.add_argument("game", help="kuhn | leduc | matrix:<path> | polymatrix:<path>")
    return parser


def _sweep_job(cfg: RunConfig) -> tuple:
    return cfg.out, run_experiment(cfg)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "validate-game":
        try:
            game = make_game(ns.game)
        except (InvalidGameError, OSError) as exc:
            print(f"invalid: {exc}")
            return EXIT_INVALID
        problems = validate(game)
        print(f"{game.name}: {game.num_players} players, {game.num_histories} histories, "
              f"{game.num_infostates} infostates")
        for p in problems:
            print(f"violation: {p}")
        return EXIT_INVALID if problems else EXIT_OK
    try:
        cfg = parse_config(ns.config, _overrides(ns))
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if ns.command == "run":
        try:
            return run_experiment(cfg)
        except RegNashError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    key = ns.sweep_key
    try:
        configs = [parse_config(None, {**{k: v for k, v in cfg.__dict__.items() if v is not None},
                                       key: v, "out": f"{_stem(cfg.out)}_{key}={v}.csv"})
                   for v in ns.values.split(",")]
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if ns.workers > 1:
        with ProcessPoolExecutor(max_workers=ns.workers) as pool:
            results = list(pool.map(_sweep_job, configs))
    else:
        results = [_sweep_job(c) for c in configs]
    for out, status in results:
        print(f"{out}: exit {status}")
    return max(status for _, status in results)


if __name__ == "__main__":
    sys.exit(main())
