import csv
import io
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from qrm import jsonio
from qrm.cli import RunConfig, config_from_args, main, parse_mu_grid
from qrm.matcore import proj
from qrm.pguess import lift_classical_to_quantum, pguess_pure_povm
from qrm.qobj import InvalidInput, Povm, QState
from qrm.sampling import random_classical_strategy, strategy_targets

Z0, Z1 = proj([1, 0]), proj([0, 1])


def run_cli(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def write_json(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def pguess_input(state, povm, strategy=None):
    obj = {"state": jsonio.state_to_json(state), "povm": jsonio.povm_to_json(povm)}
    if strategy is not None:
        obj["strategy"] = jsonio.strategy_to_json(strategy)
    return obj


class TestConfig:
    def test_mu_grid(self):
        assert parse_mu_grid("0:1:0.05") == [round(0.05 * k, 12) for k in range(21)]
        assert parse_mu_grid("0.2:0.2:0.1") == [0.2]

    @pytest.mark.parametrize("text", ["0:1", "a:b:c", "1:0:0.1", "0:1:0"])
    def test_bad_mu_grid(self, text):
        with pytest.raises(InvalidInput):
            parse_mu_grid(text)

    def test_env_tolerance(self):
        assert config_from_args(["ejm"], environ={"QRM_SOLVER_TOL": "1e-6"}).tol == 1e-6
        assert config_from_args(["ejm", "--tol", "1e-7"], environ={"QRM_SOLVER_TOL": "1e-6"}).tol == 1e-7

    def test_default_formats(self):
        assert config_from_args(["qrng-curve"], environ={}).format == "csv"
        assert config_from_args(["ejm"], environ={}).format == "json"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"command": "nope"},
            {"command": "ejm", "tol": 0.0},
            {"command": "ejm", "format": "csv"},
            {"command": "pguess"},
            {"command": "pmsim"},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidInput):
            RunConfig(**kwargs)


class TestCommands:
    def test_ejm(self, capsys):
        code, out = run_cli(capsys, "ejm", "--theta", "0.2")
        assert code == 0
        obj = json.loads(out)
        jsonschema.validate(obj["povm"], jsonio.POVM_SCHEMA)
        for v in obj["basis"]:
            jsonschema.validate(v, jsonio.MATRIX_SCHEMA)
        m = jsonio.povm_from_json(obj["povm"])
        assert np.allclose(sum(m.effects), np.eye(2))

    def test_ejm_deterministic(self, capsys):
        assert run_cli(capsys, "ejm", "--theta", "0.3")[1] == run_cli(capsys, "ejm", "--theta", "0.3")[1]

    def test_pmsim_theta(self, capsys):
        code, out = run_cli(capsys, "pmsim", "--theta", "0")
        obj = json.loads(out)
        jsonschema.validate(obj, jsonio.VISIBILITY_SCHEMA)
        assert code == 0 and obj["t_star"] == pytest.approx(2 * np.sqrt(2) / 3, abs=1e-7)
        assert obj["dual_certificate"]["valid"]

    def test_pmsim_file_deterministic(self, capsys, tmp_path):
        path = write_json(tmp_path, "m.json", jsonio.povm_to_json(Povm((Z0, Z1)).padded(4)))
        first = run_cli(capsys, "pmsim", "--in", path)
        second = run_cli(capsys, "pmsim", "--in", path)
        assert first == second
        obj = json.loads(first[1])
        assert obj["t_star"] == pytest.approx(1.0, abs=1e-7) and obj["dual_certificate"] is None

    def test_pguess_projective(self, capsys, tmp_path):
        path = write_json(tmp_path, "in.json", pguess_input(QState(np.eye(2) / 2), Povm((Z0, Z1))))
        code, out = run_cli(capsys, "pguess", "--in", path)
        obj = json.loads(out)
        jsonschema.validate(obj, jsonio.REPORT_SCHEMA)
        assert code == 0 and obj["route"] == "projective" and obj["kind"] == "exact_sdp"
        assert obj["value"] == pytest.approx(1.0, abs=1e-7)

    def test_pguess_pure(self, capsys, tmp_path):
        coin = Povm((np.eye(2) / 2, np.eye(2) / 2))
        path = write_json(tmp_path, "in.json", pguess_input(QState.pure([1, 0]), coin))
        code, out = run_cli(capsys, "pguess", "--in", path)
        obj = json.loads(out)
        assert code == 0 and obj["route"] == "pure_state" and obj["value"] == pytest.approx(1.0, abs=1e-7)
        jsonschema.validate(obj["witness"], jsonio.STRATEGY_SCHEMA)

    @pytest.mark.parametrize("lift", [False, True])
    def test_pguess_strategy(self, capsys, tmp_path, lift):
        rng = np.random.default_rng(3)
        s = random_classical_strategy(2, 3, 2, 2, rng)
        rho, m = strategy_targets(s)
        strategy = lift_classical_to_quantum(s) if lift else s
        path = write_json(tmp_path, "in.json", pguess_input(QState(rho), m, strategy))
        code, out = run_cli(capsys, "pguess", "--in", path)
        obj = json.loads(out)
        assert code == 0 and obj["kind"] == "strategy_lower_bound"
        assert obj["value"] == pytest.approx(s.value(), abs=1e-9)

    def test_pguess_mixed_general_needs_strategy(self, capsys, tmp_path):
        rng = np.random.default_rng(4)
        s = random_classical_strategy(2, 3, 2, 2, rng)
        rho, m = strategy_targets(s)
        path = write_json(tmp_path, "in.json", pguess_input(QState(rho), m))
        code, out = run_cli(capsys, "pguess", "--in", path)
        obj = json.loads(out)
        jsonschema.validate(obj, jsonio.ERROR_SCHEMA)
        assert code == 1 and "strategy" in obj["error"]["message"]

    def test_pguess_bad_strategy(self, capsys, tmp_path):
        s = random_classical_strategy(2, 2, 1, 1, np.random.default_rng(5))
        path = write_json(tmp_path, "in.json", pguess_input(QState(np.eye(2) / 2), Povm((Z0, Z1)), s))
        code, out = run_cli(capsys, "pguess", "--in", path)
        obj = json.loads(out)
        assert code == 1 and obj["error"]["type"] == "StrategyViolation"
        assert "state" in obj["error"]["violated"]

    def test_pguess_invalid_povm(self, capsys, tmp_path):
        path = write_json(tmp_path, "in.json", pguess_input(QState(np.eye(2) / 2), Povm((np.eye(2), np.eye(2)))))
        code, out = run_cli(capsys, "pguess", "--in", path)
        assert code == 1 and "completeness" in json.loads(out)["error"]["message"]

    def test_missing_file(self, capsys, tmp_path):
        code, out = run_cli(capsys, "pguess", "--in", str(tmp_path / "absent.json"))
        assert code == 1
        jsonschema.validate(json.loads(out), jsonio.ERROR_SCHEMA)

    def test_solver_failure(self, capsys, tmp_path):
        path = write_json(tmp_path, "in.json", pguess_input(QState(np.eye(2) / 2), Povm((Z0, Z1))))
        code, out = run_cli(capsys, "pguess", "--in", path, "--tol", "1e-30")
        assert code == 2 and json.loads(out)["error"]["code"] == 2

    def test_qrng_curve_csv(self, capsys):
        code, out = run_cli(capsys, "qrng-curve")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and out.splitlines()[0] == "mu,f_mu,pguess_q" and len(rows) == 21
        assert (float(rows[0]["f_mu"]), float(rows[0]["pguess_q"])) == pytest.approx((1, 1), abs=1e-6)
        assert (float(rows[-1]["f_mu"]), float(rows[-1]["pguess_q"])) == pytest.approx((0.5, 0.5), abs=1e-6)

    def test_qrng_curve_json_grid(self, capsys, tmp_path):
        out_path = tmp_path / "curve.json"
        code, out = run_cli(capsys, "qrng-curve", "--mu-grid", "0.2:0.4:0.1", "--format", "json", "--out", str(out_path))
        assert code == 0 and out == ""
        rows = json.loads(out_path.read_text())["rows"]
        assert [r["mu"] for r in rows] == [0.2, 0.3, 0.4]
        assert all(r["pguess_q"] > r["f_mu"] for r in rows)

    def test_certify_theorem4(self, capsys):
        code, out = run_cli(capsys, "certify-theorem4")
        obj = json.loads(out)
        assert code == 0 and obj["verdict"] == "separation"
        assert obj["quantum_value"] == pytest.approx(1.0, abs=1e-6)
        assert obj["classical"]["verdict"] == "certified" and obj["classical_below_one"]

    def test_selftest(self, capsys):
        code, out = run_cli(capsys, "selftest")
        assert code == 0 and json.loads(out)["passed"]

    def test_console_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "qrm.cli", "ejm"], capture_output=True, text=True)
        assert res.returncode == 0 and "povm" in json.loads(res.stdout)


def test_pure_route_matches_library(capsys, tmp_path):
    rng = np.random.default_rng(6)
    phi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    phi /= np.linalg.norm(phi)
    s = random_classical_strategy(2, 4, 1, 2, rng)
    _, m = strategy_targets(s)
    path = write_json(tmp_path, "in.json", pguess_input(QState.pure(phi), m))
    _, out = run_cli(capsys, "pguess", "--in", path)
    assert json.loads(out)["value"] == pytest.approx(pguess_pure_povm(phi, m).value, abs=1e-8)
