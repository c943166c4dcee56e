import json
import subprocess
import sys

import numpy as np
import pytest

from frontforge import cli

SOLVE_CFG = {
    "task": "solve",
    "measure": {"kind": "uniform", "support_radius": 1.0},
    "nonlinearity": {"kind": "cubic_bistable", "theta": 0.3},
    "grid": {"L": 15.0, "N": 601},
}


def write_cfg(tmp_path, cfg, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run_cli(cfg_path, out_dir, *extra):
    return cli.main(["run", str(cfg_path), "--out", str(out_dir), *extra])


class TestSolveTask:
    def test_artifacts_and_positive_speed(self, tmp_path):
        cfg = write_cfg(tmp_path, SOLVE_CFG)
        out = tmp_path / "out"
        assert run_cli(cfg, out) == 0
        front = json.loads((out / "front.json").read_text())
        assert front["c"] > 0.0
        assert front["converged"] and front["monotone"]
        assert front["identity_checks"]["identity1"] is not None
        data = np.genfromtxt(out / "front.csv", delimiter=",", names=True)
        assert data["x"].size == 601
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["files"]) == {"front.csv", "front.json"}

    def test_dump_jacobian(self, tmp_path):
        cfg = write_cfg(tmp_path, SOLVE_CFG)
        out = tmp_path / "out"
        assert run_cli(cfg, out, "--dump-jacobian") == 0
        A = np.loadtxt(out / "jacobian.csv", delimiter=",")
        assert A.shape == (601, 601)

    def test_determinism(self, tmp_path):
        cfg = write_cfg(tmp_path, SOLVE_CFG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli(cfg, out1) == 0
        assert run_cli(cfg, out2) == 0
        for name in ("front.csv", "front.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        m1.pop("created"), m2.pop("created")
        assert m1 == m2


class TestValidateTask:
    def test_well_balanced_rejected(self, tmp_path):
        cfg = dict(SOLVE_CFG, task="validate",
                   nonlinearity={"kind": "cubic_bistable", "theta": 0.5})
        path = write_cfg(tmp_path, cfg)
        out = tmp_path / "out"
        assert run_cli(path, out) == 3
        verdict = json.loads((out / "validate.json").read_text())
        assert verdict["well_balanced"] is True

    def test_admissible_config_passes(self, tmp_path):
        cfg = dict(SOLVE_CFG, task="validate")
        assert run_cli(write_cfg(tmp_path, cfg), tmp_path / "out") == 0


class TestConfigErrors:
    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        out = tmp_path / "out"
        assert cli.main(["run", str(path), "--out", str(out)]) == 1
        assert not (out / "manifest.json").exists()

    def test_unknown_task(self, tmp_path):
        cfg = dict(SOLVE_CFG, task="frobnicate")
        assert run_cli(write_cfg(tmp_path, cfg), tmp_path / "out") == 1

    def test_bad_measure_kind(self, tmp_path):
        cfg = dict(SOLVE_CFG, measure={"kind": "atomic"})
        assert run_cli(write_cfg(tmp_path, cfg), tmp_path / "out") == 1


class TestContinuationTask:
    def test_fractional_continuation(self, tmp_path):
        cfg = {
            "task": "continue",
            "measure": {"kind": "fractional", "s": 0.75},
            "nonlinearity": {"kind": "cubic_bistable", "theta": 0.3},
            "grid": {"L": 20.0, "N": 801},
        }
        out = tmp_path / "out"
        assert run_cli(write_cfg(tmp_path, cfg), out) == 0
        rep = json.loads((out / "continuation.json").read_text())
        assert len(rep["speeds"]) == len(rep["schedule"])
        assert all(c > 0 for c in rep["speeds"])
        front = json.loads((out / "front.json").read_text())
        assert front["epsilon"] > 0.0


class TestClassifyTask:
    def test_front_verdict_for_bistable(self, tmp_path):
        cfg = {
            "task": "classify",
            "measure": {"kind": "uniform", "support_radius": 1.0},
            "nonlinearity": {"kind": "cubic_bistable", "theta": 0.3},
            "grid": {"L": 30.0, "N": 601},
            "options": {"horizon": 60.0, "level": 0.5, "burn_in": 0.4,
                        "initial": {"kind": "ramp", "x0": 0.0}},
        }
        out = tmp_path / "out"
        assert run_cli(write_cfg(tmp_path, cfg), out) == 0
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["tag"] == "FRONT"
        assert verdict["value"] == pytest.approx(0.161, abs=0.02)
        traj = np.genfromtxt(out / "trajectory.csv", delimiter=",",
                             names=True)
        assert traj["t"].size >= 20


class TestBoundsTask:
    def test_sandwich(self, tmp_path):
        cfg = {
            "task": "bounds",
            "measure": {"kind": "uniform", "support_radius": 1.0},
            "nonlinearity": {"kind": "cubic_bistable", "theta": 0.3},
            "grid": {"L": 15.0, "N": 601},
            "options": {"restriction_radius": 0.97},
        }
        out = tmp_path / "out"
        assert run_cli(write_cfg(tmp_path, cfg), out) == 0
        payload = json.loads((out / "bounds.json").read_text())
        assert payload["sandwich_ok"]
        assert payload["clow"] <= payload["c"] <= payload["cbar"]


class TestEntryPoint:
    def test_console_invocation(self, tmp_path):
        cfg = write_cfg(tmp_path, dict(SOLVE_CFG, task="validate"))
        proc = subprocess.run(
            [sys.executable, "-m", "frontforge.cli", "run", str(cfg),
             "--out", str(tmp_path / "out")],
            capture_output=True, text=True)
        assert proc.returncode == 0
