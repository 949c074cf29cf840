import json

import pytest

from treespde.cli import EXIT_DIVERGED, EXIT_INVALID, EXIT_OK, main
from treespde.config import ConfigError, parse_config


def test_parse_chain_example():
    cfg, cmd = parse_config("graph: chain:4\nnoise_free_edges: [2, 3, 4]\n")
    assert cmd is None
    (nc,) = cfg.noise_configs(cfg.tree())
    assert nc.noisy == {0}


def test_parse_t_prime_vertex_pairs():
    cfg, _ = parse_config('graph: t-prime\nnoise_free_edges: ["1-2", "1-5", "6-7"]\n')
    (nc,) = cfg.noise_configs(cfg.tree())
    assert nc.noise_free == {0, 3, 5}


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("graph: chain:4\nnoise_free_edges: [9]\n", "noise_free_edges[0]: edge 9 does not exist"),
        ("graph: chain:4\nbogus: 1\n", "bogus: unknown key"),
        ("graph: chain:4\n\ntau: -1\n", "tau: must be strictly positive"),
        ("graph: nowhere\n", "graph:"),
        ("graph: chain:4\ndrift: {tag: cubic, k: 1}\n", "drift.k: unknown key"),
        ("graph: chain:4\nN: 2.5\n", "N: expected an integer"),
        ("- a\n- b\n", "mapping"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert fragment in str(exc.value)


def test_error_reports_line():
    with pytest.raises(ConfigError, match=r"\(line 3\)"):
        parse_config("graph: chain:4\nseed: 1\ntau: 0\n")


def test_resolved_defaults():
    cfg, _ = parse_config("graph: chain:4\n")
    f = cfg.resolved("feller")
    assert (f.N, f.tau, f.T, f.M_traj) == (64, 2.0**-5, 0.5, 500)
    e = cfg.resolved("ergodicity")
    assert (e.N, e.tau, e.T, e.M_traj) == (32, 2.0**-3, 30.0, 1000)
    assert e.drift == {"tag": "scaled_dissipative", "c": 2.0}


def test_analyze_t_prime(tmp_path):
    assert main(["analyze", "--graph", "t-prime", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "analysis.json").read_text())
    assert rep["bound"] == 3 and rep["matching_bound"] == 3
    assert [v["strong_feller"] for v in rep["verdicts"]] == [False, False, True, True, True]
    assert rep["verdicts"][1]["witness"] == ["0", "0", "0", "0", "0", "0", "1", "-1"]
    assert rep["sharpness"]["max_noise_free"] == 3


def test_feller_csv_and_manifest_replay(tmp_path):
    cfgfile = tmp_path / "run.yaml"
    cfgfile.write_text("graph: star:4\nM_traj: 40\nN: 16\nseed: 3\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["feller", "--config", str(cfgfile), "--out", str(a)]) == EXIT_OK
    rows = (a / "feller.csv").read_text().splitlines()
    assert rows[0] == "epsilon,estimate,stderr,noisy_edges"
    assert len(rows) == 1 + 8 * 5
    assert main(["feller", "--config", str(a / "manifest.json"), "--out", str(b)]) == EXIT_OK
    assert (a / "feller.csv").read_bytes() == (b / "feller.csv").read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert {"config", "seed", "versions", "wall_time_s"} <= set(manifest)


def test_invalid_edge_exit_code(tmp_path, capsys):
    assert main(["analyze", "--graph", "chain:4", "--noise-free", "9", "--out", str(tmp_path)]) == EXIT_INVALID
    assert "edge 9" in capsys.readouterr().err


def test_divergence_exit_code(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("graph: chain:4\ndrift: cubic\nN: 8\nT: 2\ntau: 0.5\nM_traj: 20\ninitial: X0_3\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) in (EXIT_OK, EXIT_DIVERGED)


def test_spectrum_and_simulate(tmp_path):
    assert main(["spectrum", "--graph", "star:4", "--N", "8", "--out", str(tmp_path), "--samples", "3"]) == EXIT_OK
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "mode_index,eigenvalue,family,generator" and len(lines) == 9
    assert main(["simulate", "--graph", "chain:4", "--N", "4", "--out", str(tmp_path), "--fields", "2"]) == EXIT_OK
    traj = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert traj[0] == "step,time,c_1,c_2,c_3,c_4" and len(traj) == 1 + 17


def test_irreducibility_and_plot(tmp_path):
    args = ["irreducibility", "--graph", "t-prime", "--noise-free", "6-7,6-8", "--M", "30", "--N", "16",
            "--out", str(tmp_path), "--plot"]
    assert main(args) == EXIT_OK
    rows = [r.split(",") for r in (tmp_path / "reachability.csv").read_text().splitlines()[1:]]
    assert all(float(p) == 0.0 for f, _, p, _ in rows if f == "6")
    assert (tmp_path / "reachability.svg").read_text().startswith("<?xml")


def test_verify_passes(tmp_path):
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_OK
