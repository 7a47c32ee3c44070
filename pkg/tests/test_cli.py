import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from fracgraph.cli import main, read_field, read_series, summarize_outputs, EXIT_DIVERGED, EXIT_INVALID, EXIT_OK

CONFIGS = Path(__file__).parent.parent / "configs"

SMALL = {
    "edges": [
        {"length": 1.0, "nodes": 12, "gamma": "1 + 0.3*sin(pi*x)"},
        {"length": 1.0, "nodes": 12, "gamma": "1.2"},
        {"length": 1.0, "nodes": 12, "gamma": "1 + 0.2*x"},
    ],
    "alpha": 0.5,
    "beta": 0.75,
    "T": 1.0,
    "time_steps": 12,
    "sources": {"h": "0", "g": "2 + 0.3*sin(pi*x + k)"},
    "eta": {"b": 1.0, "phi": "-1 + 0.3*cos(2*pi*x)"},
    "manufactured": {"f_true": "1 + t^2", "refinement": 2},
    "options": {"snapshots": 3},
}


def write(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def summary(out):
    return json.loads((out / "summary.json").read_text())


def test_solve_direct(tmp_path):
    doc = dict(SMALL, sources={"h": "t*cos(pi*x) + k"})
    out = tmp_path / "d"
    assert main(["solve-direct", str(write(tmp_path, doc)), "--out", str(out)]) == EXIT_OK
    s = summary(out)
    assert s["exit_status"] == 0
    assert s["diagnostics"]["max_flux_residual"] < 1e-10
    assert len(list(out.glob("field_*.csv"))) == 3
    f = read_field(out / "field_12.csv")
    assert f["step"] == 12 and f["x"].size == 3 * 13
    assert summarize_outputs(out)["field_max_abs_phi"] == pytest.approx(s["field_max_abs_phi"])


def test_solve_inverse_outputs_consistent(tmp_path):
    out = tmp_path / "i"
    assert main(["solve-inverse", str(write(tmp_path, SMALL)), "--out", str(out)]) == EXIT_OK
    s = summary(out)
    t, f = read_series(out / "f.csv")
    assert t.size == 13
    assert summarize_outputs(out)["f_l2_norm"] == pytest.approx(s["f_l2_norm"], rel=1e-12)
    assert s["relative_error_vs_f_true"] < 0.05
    assert s["B_form"] == "moment"


def test_deterministic(tmp_path):
    cfg = write(tmp_path, SMALL)
    for name in ("a", "b"):
        assert main(["solve-inverse", str(cfg), "--out", str(tmp_path / name)]) == EXIT_OK
    assert (tmp_path / "a" / "summary.json").read_text() == (tmp_path / "b" / "summary.json").read_text()
    assert (tmp_path / "a" / "f.csv").read_text() == (tmp_path / "b" / "f.csv").read_text()


def test_check_k1_zero_g(tmp_path):
    out = tmp_path / "k"
    assert main(["check-k1", str(CONFIGS / "k1_zero_g.yaml"), "--out", str(out)]) == EXIT_INVALID
    assert "q = 0" in summary(out)["k1"]["violations"]


def test_solve_inverse_infeasible(tmp_path):
    doc = dict(SMALL, sources={"h": "0", "g": "0"})
    out = tmp_path / "z"
    assert main(["solve-inverse", str(write(tmp_path, doc)), "--out", str(out)]) == EXIT_INVALID
    assert "q = 0" in summary(out)["error"]


def test_divergence_exit_code(tmp_path):
    out = tmp_path / "x"
    status = main(["solve-inverse", str(write(tmp_path, SMALL)), "--out", str(out), "--tol", "1e-15",
                   "--max-iter", "2"])
    assert status == EXIT_DIVERGED
    s = summary(out)
    assert len(s["residual_history"]) == 2


def test_invalid_config_exit_code(tmp_path):
    out = tmp_path / "bad"
    doc = dict(SMALL, beta=0.4)
    assert main(["solve-direct", str(write(tmp_path, doc)), "--out", str(out)]) == EXIT_INVALID
    assert "beta" in summary(out)["error"]
    assert main(["solve-direct", str(tmp_path / "missing.yaml"), "--out", str(out)]) == EXIT_INVALID


def test_bad_override(tmp_path):
    out = tmp_path / "o"
    assert main(["convergence", str(write(tmp_path, SMALL)), "--out", str(out), "--levels", "8x8"]) == EXIT_INVALID


def test_verify_operators(tmp_path):
    out = tmp_path / "v"
    assert main(["verify-operators", str(write(tmp_path, SMALL)), "--out", str(out), "--seed", "3"]) == EXIT_OK
    s = summary(out)
    assert all(c["passed"] for c in s["checks"].values())
    assert s["seed"] == 3


def test_convergence(tmp_path):
    out = tmp_path / "c"
    status = main(["convergence", str(write(tmp_path, SMALL)), "--out", str(out), "--levels", "8x16,16x32,32x64"])
    assert status == EXIT_OK
    s = summary(out)
    assert s["monotone"]
    assert s["orders"][0] is None and s["orders"][1] > 0.5
    assert (out / "convergence.csv").read_text().startswith("N,M,error,order")


def test_module_entry_point(tmp_path):
    out = tmp_path / "m"
    r = subprocess.run([sys.executable, "-m", "fracgraph", "check-k1", str(write(tmp_path, SMALL)),
                        "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert summary(out)["k1"]["feasible"]
