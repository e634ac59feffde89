import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from paratrend.cli import main
from paratrend.fixtures import fixture_path

SMALL = str(fixture_path("sim_small"))
THREE = str(fixture_path("three_group"))


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, "--output-dir", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_test_command_outputs(tmp_path):
    code, out = run(tmp_path, "test", SMALL, "--bandwidth", "0.2", "--sims", "200", "--seed", "7")
    assert code == 0
    rec = json.loads((out / "test.json").read_text())
    for key in ("delta_hat", "p_value", "q_alpha", "config"):
        assert key in rec
    assert rec["config"]["test"]["seed"] == 7 and "workers" not in rec["config"]["test"]
    null = read_csv(out / "null_samples.csv")
    assert len(null) == 201
    assert (out / "trends.csv").exists() and (out / "longrun.csv").exists()


def test_cluster_then_retest_reproduces_p(tmp_path):
    code, out = run(tmp_path, "cluster", THREE, "--bandwidth", "0.1", "--sims", "200", "--seed", "3")
    assert code == 0
    rec = json.loads((out / "cluster.json").read_text())
    assert len(rec["clusters"]) == 3
    first = rec["clusters"][0]
    members = ",".join(str(i) for i in first["indices"])
    code, out2 = run(
        tmp_path / "again",
        "test", THREE, "--members", members, "--bandwidth", "0.1", "--sims", "200", "--seed", "3",
        "--longrun-csv", str(out / "longrun.csv"),
    )
    assert code == 0
    again = json.loads((out2 / "test.json").read_text())
    assert again["p_value"] == first["p_value"]
    assert again["delta_hat"] == first["delta_hat"]


def test_longrun_and_bandwidth_commands(tmp_path, capsys):
    code, out = run(tmp_path, "longrun", SMALL, "--grid-size", "21")
    assert code == 0
    rows = read_csv(out / "longrun.csv")
    assert len(rows) == 22
    code, out = run(tmp_path, "bandwidth", SMALL, "--grid", "0.05,0.1,0.2,0.3")
    assert code == 0
    assert "argmin" in capsys.readouterr().out
    rec = json.loads((out / "bandwidth.json").read_text())
    assert rec["chosen"] in (0.05, 0.1, 0.2, 0.3)


def test_simulate_commands(tmp_path):
    code, out = run(
        tmp_path, "simulate", "--study", "acceptance", "--T", "60", "--N", "10", "--b", "0.3",
        "--reps", "100", "--sims", "100", "--seed", "1",
    )
    assert code == 0
    rows = read_csv(out / "acceptance.csv")
    assert "acceptance" in rows[0] and len(rows) == 2
    code, out = run(tmp_path / "g", "simulate", "--study", "generate", "--T", "50", "--N", "4", "--seed", "2")
    assert code == 0
    assert (out / "panel.csv").exists() and (out / "true_longrun.csv").exists()


def test_exit_codes(tmp_path):
    assert run(tmp_path, "test", str(tmp_path / "missing.csv"), "--bandwidth", "0.2", "--seed", "1")[0] == 3
    assert run(tmp_path, "test", SMALL, "--bandwidth", "2.0", "--seed", "1")[0] == 2
    assert run(tmp_path, "test", SMALL, "--bandwidth", "0.2", "--alpha", "1.5", "--seed", "1")[0] == 2
    bad = tmp_path / "neg.csv"
    bad.write_text("1,2\n-1,3\n2,2\n3,3\n4,4\n")
    assert run(tmp_path, "test", str(bad), "--log10", "--bandwidth", "0.5", "--seed", "1")[0] == 3
    assert run(tmp_path, "bandwidth", THREE)[0] == 4
    with pytest.raises(SystemExit) as e:
        main(["test", SMALL])
    assert e.value.code == 2


def test_outputs_identical_across_workers(tmp_path):
    blobs = []
    for w in ("1", "3"):
        code, out = run(tmp_path / w, "test", SMALL, "--bandwidth", "0.2", "--sims", "600", "--seed", "5", "--workers", w)
        assert code == 0
        blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert blobs[0] == blobs[1]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "paratrend", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "paratrend" in res.stdout


def test_longrun_from_errors_matches_library(tmp_path):
    from paratrend.longrun import WindowParams, longrun_g
    from paratrend.panel import load_panel

    code, out = run(tmp_path, "longrun", SMALL, "--errors", "--grid-size", "11")
    assert code == 0
    rows = read_csv(out / "longrun.csv")[1:]
    got = np.array([float(r[1]) for r in rows])
    ref = longrun_g(load_panel(SMALL).values, WindowParams(), np.linspace(0, 1, 11)).values
    assert np.allclose(got, ref, rtol=1e-12)
