import csv
import json
import os
import subprocess
import sys

import pytest

from tvclt import __version__
from tvclt.cli import run

UNIFORM = {"family": "uniform"}
BERNOULLI = {"family": "bernoulli", "params": {"p": 0.5}}
FAST = ["--grid-points", "4096", "--threads", "2"]


@pytest.fixture
def spec(tmp_path):
    def write(doc, name="spec.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)

    return write


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_tv_of_identical_specs(spec, tmp_path):
    out = tmp_path / "tv.json"
    s = spec(UNIFORM)
    assert run(["tv", "--spec-a", s, "--spec-b", s, "--out", str(out)] + FAST) == 0
    doc = json.loads(out.read_text())
    assert doc["value"] == 0.0
    assert doc["tool_version"] == __version__
    assert doc["config_echo"]["grid_points"] == 4096


def test_tv_kolmogorov_of_shifted(spec, tmp_path):
    out = tmp_path / "k.json"
    s = spec(UNIFORM)
    assert run(["tv", "--spec-a", s, "--spec-b", s, "--gamma", "0.5", "--kind", "kolmogorov", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["value"] == pytest.approx(0.5, abs=1e-9)


def test_convolve_writes_csv_and_sidecar(spec, tmp_path):
    out = tmp_path / "s.csv"
    assert run(["convolve", "--spec", spec(UNIFORM), "--n", "3", "--out", str(out)] + FAST) == 0
    rows = read_csv(out)
    assert rows[0] == ["x", "density"]
    assert len(rows) > 100
    side = json.loads((tmp_path / "s.csv.json").read_text())
    assert side["tool_version"] == __version__


def test_delta_series_is_deterministic(spec, tmp_path):
    s = spec(UNIFORM)
    outs = []
    for k, threads in enumerate(("1", "4")):
        out = tmp_path / f"d{k}.csv"
        assert run(["delta-series", "--spec", s, "--n-list", "4,8,16,32,64,128", "--out", str(out),
                    "--grid-points", "4096", "--threads", threads]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    rows = read_csv(tmp_path / "d0.csv")
    assert rows[0] == ["n", "delta", "tolerance"]
    deltas = [float(r[1]) for r in rows[1:]]
    assert all(b < a for a, b in zip(deltas, deltas[1:]))

    fit = tmp_path / "fit.json"
    assert run(["rate-fit", "--in", str(tmp_path / "d0.csv"), "--out", str(fit)]) == 0
    doc = json.loads(fit.read_text())
    assert doc["branch"] == "converging"
    assert doc["slope"] < -0.5


def test_rate_fit_degenerate(spec, tmp_path):
    series = tmp_path / "b.csv"
    assert run(["delta-series", "--spec", spec(BERNOULLI), "--n-list", "4,8,16,32", "--out", str(series)] + FAST) == 0
    out = tmp_path / "fit.json"
    assert run(["rate-fit", "--in", str(series), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["branch"] == "degenerate_tv_one"


def test_rate_fit_mixed_branch_exits_one(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("n,delta,tolerance\n4,1,0\n8,1,0\n16,0.5,0\n32,0.3,0\n64,0.2,0\n128,0.1,0\n")
    assert run(["rate-fit", "--in", str(p)]) == 1


def test_lemma1_verify(tmp_path):
    out = tmp_path / "l1.csv"
    assert run(["lemma1-verify", "--a-list", "0.5", "--n-max", "6", "--gamma-list", "0.1", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["a", "n", "gamma", "exact", "bound", "holds"]
    last = rows[-1]
    assert (float(last[0]), int(last[1]), float(last[2])) == (0.5, 6, 0.1)
    assert float(last[4]) == pytest.approx(0.0797885, abs=1e-7)
    assert all(r[5] in ("true", "True", "1") for r in rows[1:])


def test_decompose_and_shift_bound(spec, tmp_path):
    s = spec(UNIFORM)
    out, res = tmp_path / "c.json", tmp_path / "r.csv"
    assert run(["decompose", "--spec", s, "--out", str(out), "--residual-csv", str(res)]) == 0
    doc = json.loads(out.read_text())
    assert doc["theta"] == pytest.approx(0.25)
    assert read_csv(res)[0] == ["x", "density"]
    out = tmp_path / "b.json"
    assert run(["shift-bound", "--spec", s, "--n", "100", "--gamma", "0.1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["total"] == pytest.approx(0.08683, abs=1e-5)


def test_stein_check_and_bound_rhs(spec, tmp_path):
    out = tmp_path / "s.csv"
    assert run(["stein-check", "--sets", "random:20", "--seed", "3", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["set", "intervals", "nh", "sup_fprime", "residual", "holds"]
    assert len(rows) == 21
    assert max(float(r[3]) for r in rows[1:]) <= 1.0 + 1e-9
    out = tmp_path / "r.json"
    assert run(["bound-rhs", "--spec", spec(UNIFORM), "--n", "8", "--out", str(out)] + FAST) == 0
    doc = json.loads(out.read_text())
    assert doc["holds"] and doc["rhs"] >= doc["delta"]


def test_usage_errors(spec, tmp_path):
    assert run(["frobnicate"]) == 2
    assert run(["tv", "--spec-a", str(tmp_path / "missing.json"), "--spec-b", "x"]) == 2
    assert run(["decompose", "--spec", spec(BERNOULLI)]) == 2
    assert run(["convolve", "--spec", spec({"family": "cauchy"}), "--n", "2"]) == 2
    assert run(["convolve", "--spec", spec(UNIFORM), "--n", "2", "--threads", "0"]) == 2


def test_failed_write_leaves_no_partial_file(spec, tmp_path):
    target = tmp_path / "nodir" / "out.csv"
    with pytest.raises(OSError):
        run(["convolve", "--spec", spec(UNIFORM), "--n", "2", "--out", str(target)] + FAST)
    assert not target.exists()
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".tmp-")]


def test_module_entry_point(spec):
    proc = subprocess.run(
        [sys.executable, "-m", "tvclt", "--version"], capture_output=True, text=True, env=os.environ.copy()
    )
    assert proc.returncode == 0
    assert __version__ in proc.stdout
