import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from resmix import cli, verify

INF = "inf"


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def run(*argv):
    try:
        return cli.main(list(argv))
    except SystemExit as exc:  # argparse usage errors
        return exc.code


def box(lower, upper):
    return {"type": "normal_cone_box", "lower": lower, "upper": upper}


HALFSPACES = {
    "family": {"atoms": [
        {"weight": 0.5, "linop": [[1, 0], [0, 1]], "payload": box(["-inf", "-inf"], [0, INF])},
        {"weight": 0.5, "linop": [[1, 0], [0, 1]], "payload": box([1, "-inf"], [INF, INF])},
    ]},
    "x0": [-2.0, 3.0],
    "stop": {"abs_tol": 1e-12, "max_iter": 1000},
}

DISK_HALFSPACE = {
    "family": {"atoms": [
        {"weight": 0.5, "linop": [[1, 0], [0, 1]], "payload": {"type": "normal_cone_ball", "center": [0, 0], "radius": 1}},
        {"weight": 0.5, "linop": [[1, 0], [0, 1]], "payload": box([0.5, "-inf"], [INF, INF])},
    ]},
    "x0": [3.0, 4.0],
}


def read_json(path):
    return json.loads(path.read_text())


class TestSolve:
    def test_halfspaces(self, tmp_path):
        out = tmp_path / "out"
        assert run("solve", "--input", write(tmp_path, "p.json", HALFSPACES), "--output", str(out)) == 0
        s = read_json(out / "summary.json")
        assert s["x"][0] == pytest.approx(0.5, abs=1e-6)
        assert s["seed"] == 0 and "tolerances" in s and s["identities"]
        assert [e["residual"] for e in s["exactness"]] == pytest.approx([0.5, 0.5], abs=1e-6)
        rows = list(csv.reader((out / "trace.csv").open()))
        assert rows[0] == ["iter", "step_norm"] and len(rows) == s["iterations"] + 1

    def test_disk_and_halfspace(self, tmp_path, capsys):
        assert run("solve", "--input", write(tmp_path, "p.json", DISK_HALFSPACE)) == 0
        s = json.loads(capsys.readouterr().out)
        assert s["converged"] and max(e["residual"] for e in s["exactness"]) <= 1e-6

    def test_mass_condition_message(self, tmp_path, capsys):
        bad = json.loads(json.dumps(HALFSPACES))
        for a in bad["family"]["atoms"]:
            a["weight"] = 0.75
        assert run("solve", "--input", write(tmp_path, "p.json", bad)) == 1
        assert "0 < sum_i w_i ||L_i||^2 <= 1" in capsys.readouterr().err

    def test_malformed_json_location(self, tmp_path, capsys):
        assert run("solve", "--input", write(tmp_path, "broken.json", '{\n  "family":\n    ,\n}')) == 1
        assert "broken.json:3:5" in capsys.readouterr().err

    def test_missing_field(self, tmp_path, capsys):
        assert run("solve", "--input", write(tmp_path, "p.json", {"x0": [0.0]})) == 1
        assert "family" in capsys.readouterr().err

    def test_missing_input(self, capsys):
        assert run("solve") == 1

    def test_max_iter_exit_code(self, tmp_path, capsys):
        assert run("solve", "--input", write(tmp_path, "p.json", DISK_HALFSPACE), "--max-iter", "3") == 2
        assert json.loads(capsys.readouterr().out)["converged"] is False

    def test_flag_overrides(self, tmp_path, capsys):
        assert run("solve", "--input", write(tmp_path, "p.json", DISK_HALFSPACE),
                   "--lambda", "1.5", "--gamma", "2", "--tol", "1e-10") == 0
        s = json.loads(capsys.readouterr().out)
        assert s["gamma"] == 2.0 and s["tolerances"]["abs_tol"] == 1e-10

    def test_bad_lambda(self, tmp_path, capsys):
        assert run("solve", "--input", write(tmp_path, "p.json", DISK_HALFSPACE), "--lambda", "2") == 1

    def test_subspace(self, tmp_path, capsys):
        cfg = dict(HALFSPACES, subspace=[[1.0, 1.0]], x0=[0.0, 0.0])
        assert run("solve", "--input", write(tmp_path, "p.json", cfg)) == 0
        s = json.loads(capsys.readouterr().out)
        assert s["x"] == pytest.approx([0.5, 0.5], abs=1e-6) and s["in_v_defect"] <= 1e-12

    def test_unknown_flag(self, capsys):
        assert run("solve", "--bogus") == 1

    def test_deterministic(self, tmp_path):
        p = write(tmp_path, "p.json", HALFSPACES)
        for d in ("a", "b"):
            run("solve", "--input", p, "--output", str(tmp_path / d))
        for f in ("summary.json", "trace.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.fixture(scope="module")
def verify_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("verify")
    codes = {seed: cli.main(["verify", "--seed", str(seed), "--output", str(base / str(seed))]) for seed in (0, 7, 8)}
    return base, codes


class TestVerify:
    def test_default_seed_passes(self, verify_runs):
        base, codes = verify_runs
        assert codes[0] == 0
        s = read_json(base / "0" / "verify.json")
        assert s["passed"] and s["seed"] == 0 and s["n_families"] == 50
        assert [r["name"] for r in s["identities"]] == list(verify.IDENTITY_NAMES)
        rows = list(csv.DictReader((base / "0" / "verify.csv").open()))
        assert len(rows) == len(verify.IDENTITY_NAMES)

    def test_seeds_differ(self, verify_runs):
        base, codes = verify_runs
        assert codes[7] == 0 and codes[8] == 0
        a, b = read_json(base / "7" / "verify.json"), read_json(base / "8" / "verify.json")
        assert a["identities"] != b["identities"]

    @pytest.mark.parametrize("fault", ["resolvent_mixture", "prox_comixture"])
    def test_injected_fault_is_named(self, tmp_path, capsys, fault):
        cfg = write(tmp_path, "v.json", {"n_families": 3})
        assert run("verify", "--input", cfg, "--inject-fault", fault) == 2
        err = capsys.readouterr().err
        assert "failing identities:" in err
        failing = err.split("failing identities:")[1]
        assert any(name in failing for name in verify.IDENTITY_NAMES)

    def test_deterministic(self, tmp_path, capsys):
        cfg = write(tmp_path, "v.json", {"n_families": 2})
        for d in ("a", "b"):
            run("verify", "--input", cfg, "--seed", "3", "--output", str(tmp_path / d))
        for f in ("verify.json", "verify.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


class TestSoftThreshold:
    def test_first_component(self, tmp_path, capsys):
        x = [3.0, -0.5, 0, 0, 0, 0, 0, 0]
        assert run("demo-softthreshold", "--input", write(tmp_path, "c.json", {"x": x})) == 0
        s = json.loads(capsys.readouterr().out)
        assert s["pairs"][0]["output"][0] == pytest.approx(0.25, abs=1e-15)
        assert s["max_error"] <= 1e-12

    def test_degenerate_interval(self, tmp_path, capsys):
        x = list(np.linspace(-3, 3, 8))
        assert run("demo-softthreshold", "--input", write(tmp_path, "c.json", {"x": x, "rho": 0.0})) == 0
        out = json.loads(capsys.readouterr().out)["pairs"][0]["output"]
        assert out == pytest.approx(np.array(x) / 8, abs=1e-15)

    def test_inside_intervals(self, tmp_path, capsys):
        x = [0.5, -0.9, 0.0, 0.1, 0.2, -0.3, 0.99, -1.0]
        assert run("demo-softthreshold", "--input", write(tmp_path, "c.json", {"x": x})) == 0
        assert json.loads(capsys.readouterr().out)["pairs"][0]["output"] == [0.0] * 8

    def test_random_basis_writes_files(self, tmp_path):
        cfg = write(tmp_path, "c.json", {"basis": "random", "samples": 50})
        assert run("demo-softthreshold", "--input", cfg, "--seed", "4", "--output", str(tmp_path / "o")) == 0
        assert read_json(tmp_path / "o" / "softthreshold.json")["passed"]
        assert len((tmp_path / "o" / "softthreshold.csv").read_text().splitlines()) == 1 + 50 * 8

    def test_excess_mass(self, tmp_path, capsys):
        assert run("demo-softthreshold", "--input", write(tmp_path, "c.json", {"n": 2, "weights": [1, 1]})) == 1
        assert "mass" in capsys.readouterr().err


class TestWiener:
    def test_defaults_recover(self, tmp_path):
        assert run("demo-wiener", "--output", str(tmp_path)) == 0
        s = read_json(tmp_path / "wiener.json")
        assert s["max_recovery_residual"] <= 1e-6 and s["iterations"] <= 10000

    def test_noise(self, tmp_path, capsys):
        assert run("demo-wiener", "--input", write(tmp_path, "c.json", {"noise": 0.1})) == 0
        s = json.loads(capsys.readouterr().out)
        assert s["max_recovery_residual"] > 1e-3 and s["stationarity_defect"] <= 1e-6

    def test_single_identity_atom(self, tmp_path, capsys):
        cfg = {"n_atoms": 1, "x_dim": 3, "v_dim": 3, "atom_dim": 3, "clip": None, "identity_linops": True}
        assert run("demo-wiener", "--input", write(tmp_path, "c.json", cfg)) == 0
        s = json.loads(capsys.readouterr().out)
        assert s["iterations"] == 2 and s["x"] == s["truth"]

    def test_gamma_rejected(self, capsys):
        assert run("demo-wiener", "--gamma", "2") == 1


class TestProxAverage:
    def test_default_pair_at_three(self, capsys):
        assert run("prox-average") == 0
        s = json.loads(capsys.readouterr().out)
        xs = np.array(s["table"]["x"])
        k = int(np.argmin(np.abs(xs - 3.0)))
        assert xs[k] == pytest.approx(3.0) and s["table"]["prox"][k] == pytest.approx(1.75, abs=1e-12)

    def test_function_and_conjugate(self, tmp_path, capsys):
        cfg = {"functions": [{"type": "abs_sum", "weights": [1.0]},
                             {"type": "conjugate", "inner": {"type": "abs_sum", "weights": [1.0]}}],
               "weights": [0.5, 0.5]}
        assert run("prox-average", "--input", write(tmp_path, "c.json", cfg)) == 0
        t = json.loads(capsys.readouterr().out)["table"]
        assert np.max(np.abs(np.array(t["prox"]) - np.array(t["x"]) / 2)) <= 1e-12

    def test_single_function(self, tmp_path, capsys):
        cfg = {"functions": [{"type": "abs_sum", "weights": [1.0]}], "weights": [1.0], "range": [-4, 4], "points": 9}
        assert run("prox-average", "--input", write(tmp_path, "c.json", cfg)) == 0
        t = json.loads(capsys.readouterr().out)["table"]
        assert t["prox"] == pytest.approx([-3, -2, -1, 0, 0, 0, 1, 2, 3])
        assert t["envelope"] == pytest.approx([3.5, 2.5, 1.5, 0.5, 0, 0.5, 1.5, 2.5, 3.5])

    def test_weights_not_probability(self, tmp_path, capsys):
        cfg = {"functions": [{"type": "abs_sum", "weights": [1.0]}], "weights": [0.5]}
        assert run("prox-average", "--input", write(tmp_path, "c.json", cfg)) == 1

    def test_csv_output(self, tmp_path):
        assert run("prox-average", "--output", str(tmp_path)) == 0
        rows = list(csv.reader((tmp_path / "prox_average.csv").open()))
        assert rows[0] == ["x", "prox", "envelope", "moreau_residual"] and len(rows) == 102


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "resmix.cli", "prox-average", "--output", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and (tmp_path / "prox_average.json").exists()
