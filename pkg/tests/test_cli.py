import subprocess
import sys

import numpy as np
import pytest

from regnash.cli import main
from regnash.config import ConfigError, RunConfig, dumps_config, parse_config, parse_pairs
from regnash.diagnostics import read_csv
from regnash.games import make_game
from regnash.policy import Policy, read_policy, write_policy


def test_parse_config_example(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("eta=0.5\ngame=kuhn\ntransform=zerosum\nsteps=1000\ndt=0.01\nout=a.csv\n")
    cfg = parse_config(str(path))
    assert cfg == RunConfig(game="kuhn", out="a.csv", transform="zerosum", eta=0.5, steps=1000, dt=0.01)
    assert parse_config(str(path), {"eta": "2"}).eta == 2.0


@pytest.mark.parametrize("text,key", [
    ("game=kuhn\nout=a\neta=-1\n", "eta"),
    ("game=kuhn\nout=a\nsteps=1.5\n", "steps"),
    ("game=kuhn\nout=a\ndt=fast\n", "dt"),
    ("game=kuhn\nout=a\ncolour=red\n", "colour"),
    ("game=kuhn\n", "out"),
    ("game=kuhn\nout=a\ntransform=other\n", "transform"),
])
def test_config_errors_name_key(tmp_path, text, key):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError) as err:
        parse_config(str(path))
    assert err.value.key == key
    assert key in str(err.value)


def test_config_roundtrip():
    cfg = parse_config(None, {"game": "kuhn", "out": "x.csv", "seed": "3", "reference": "nash"})
    assert parse_config(None, parse_pairs(dumps_config(cfg))) == cfg
    assert parse_pairs("transform=none\nseed=none\n") == {"transform": "none", "seed": None}


def run_cli(*args):
    return main([str(a) for a in args])


def test_plain_run_is_reproducible(tmp_path):
    out = tmp_path / "a.csv"
    args = ["run", "--game", "matrix:biased_mp", "--out", out, "--steps", 500, "--reference", "nash"]
    assert run_cli(*args) == 0
    first = out.read_bytes()
    assert run_cli(*args) == 0
    assert out.read_bytes() == first
    text = first.decode()
    header, rows, summary = read_csv(text)
    documented = {line[2:].split(":")[0] for line in text.splitlines() if line.startswith("# ")}
    assert set(header) <= documented
    assert rows.shape[0] == 6
    assert summary["aborted"] == "0"
    assert float(summary["J_max_drift"]) < 1e-3


def test_config_file_and_flags(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"game=matrix:biased_mp\nout={tmp_path / 'c.csv'}\nsteps=100\ntransform=zerosum\neta=5\n")
    assert run_cli("run", cfg, "--eta", "0.5") == 0
    header, rows, _ = read_csv(str(tmp_path / "c.csv"))
    assert rows[0, header.index("eta")] == 0.5


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run_cli("run", "--game", "kuhn", "--out", tmp_path / "x.csv", "--eta", "-1") == 2
    assert "eta" in capsys.readouterr().err
    assert run_cli("run", "--game", "nosuchgame", "--out", tmp_path / "x.csv") == 2
    assert run_cli("run", "--game", "kuhn", "--out", tmp_path / "x.csv", "--reference", "qre") == 2


def test_numeric_failure_exit_3(tmp_path):
    game = tmp_path / "huge.txt"
    game.write_text("matrix 2 2\n1e307 0\n0 0\n")
    out = tmp_path / "h.csv"
    assert run_cli("run", "--game", f"matrix:{game}", "--out", out, "--dt", 10, "--steps", 50, "--stride", 1) == 3
    _, rows, summary = read_csv(str(out))
    assert summary["aborted"] == "1"
    assert "player" in summary["error"]
    assert rows.shape[0] >= 1


def test_validate_game(tmp_path, capsys):
    assert run_cli("validate-game", "kuhn") == 0
    assert "12 infostates" in capsys.readouterr().out
    bad = tmp_path / "bad.txt"
    bad.write_text("polymatrix 2\n2 2\n1 0\n0 1\n1 0\n0 1\n")
    assert run_cli("validate-game", f"polymatrix:{bad}") == 1


def test_anchoring_pipeline(tmp_path):
    ref = tmp_path / "nash.policy"
    g = make_game("matrix:biased_mp")
    write_policy(Policy(g, [11 / 13, 2 / 13, 11 / 13, 2 / 13]), ref)
    out = tmp_path / "anch.csv"
    pol = tmp_path / "final.policy"
    assert run_cli("run", "--game", "matrix:biased_mp", "--out", out, "--transform", "monotone",
                   "--anchor-every", 2000, "--anchors", 4, "--reference", ref, "--policy-out", pol) == 0
    header, rows, summary = read_csv(str(out))
    assert header == ["k", "nashconv_base", "xi_to_ref", "xi_step", "sum_m", "sum_delta", "sum_kappa",
                      "identity_residual"]
    assert rows[:, 0].tolist() == [0, 1, 2, 3, 4]
    assert np.all(np.abs(rows[1:, -1]) < 1e-8)
    assert np.all(np.diff(rows[:, 2]) < 0)
    assert read_policy(pol, g).distance(Policy(g, [11 / 13, 2 / 13, 11 / 13, 2 / 13])) < 0.1


def test_snapshots_and_seed(tmp_path):
    out = tmp_path / "s.csv"
    assert run_cli("run", "--game", "kuhn", "--out", out, "--steps", 200, "--stride", 50,
                   "--snapshot-every", 100, "--seed", 4, "--transform", "monotone") == 0
    snaps = sorted(p.name for p in tmp_path.glob("s.step*.policy"))
    assert snaps == ["s.step0.policy", "s.step100.policy", "s.step200.policy"]
    start = read_policy(tmp_path / "s.step0.policy", make_game("kuhn"))
    assert not np.allclose(start.probs, 0.5)


def test_sweep(tmp_path, capsys):
    out = tmp_path / "sw.csv"
    assert main(["sweep", "--game", "matrix:biased_mp", "--out", str(out), "--transform", "zerosum",
                 "--steps", "200", "--values", "0.5,1,10", "--workers", "2"]) == 0
    names = sorted(p.name for p in tmp_path.glob("sw_*.csv"))
    assert names == ["sw_eta=0.5.csv", "sw_eta=1.csv", "sw_eta=10.csv"]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "regnash", "validate-game", "matrix:biased_mp"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "2 infostates" in res.stdout


def test_kuhn_nash_reference(tmp_path):
    out = tmp_path / "k.csv"
    assert run_cli("run", "--game", "kuhn", "--out", out, "--steps", 100, "--reference", "nash") == 0
    header, rows, _ = read_csv(str(out))
    assert np.all(np.isfinite(rows[:, header.index("xi_ref")]))


def test_anchor_key(tmp_path):
    g = make_game("matrix:biased_mp")
    anchor = tmp_path / "mu.policy"
    write_policy(Policy(g, [0.9, 0.1, 0.2, 0.8]), anchor)
    out = tmp_path / "a.csv"
    assert run_cli("run", "--game", "matrix:biased_mp", "--out", out, "--transform", "zerosum", "--eta", 1000,
                   "--dt", 0.001, "--steps", 20000, "--stride", 20000, "--anchor", anchor,
                   "--policy-out", tmp_path / "f.policy") == 0
    # a dominant penalty pulls the solution onto the anchor
    assert read_policy(tmp_path / "f.policy", g).distance(Policy(g, [0.9, 0.1, 0.2, 0.8])) < 0.01
    assert run_cli("run", "--game", "matrix:biased_mp", "--out", out, "--anchor", anchor,
                   "--anchor-every", 10) == 2
    assert run_cli("run", "--game", "matrix:biased_mp", "--out", out, "--anchor", tmp_path / "none") == 2
