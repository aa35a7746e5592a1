import io
import json

import numpy as np
import pytest

from formation_flow import PRESETS, ConfigError, Scenario
from formation_flow.cli import (
    EXIT_CONFIG, EXIT_INCORRECT, EXIT_INFEASIBLE, EXIT_INTEGRATION, EXIT_OK, EXIT_REFINEMENT, main)
from formation_flow.dynamics import read_trajectory_csv

K4_TOML = """
name = "k4"
law = "locked"
num_agents = 4
alpha = 1.0
distances_are_squared = true

[distances]
"1-2" = 16.0
"1-3" = 25.0
"1-4" = 10.0
"2-3" = 17.0
"2-4" = 18.0
"3-4" = 5.0
"""


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


@pytest.fixture
def k4_config(tmp_path):
    path = tmp_path / "k4.toml"
    path.write_text(K4_TOML)
    return str(path)


def write(tmp_path, text, name="s.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigFiles:
    def test_round_trip(self):
        for scenario in PRESETS.values():
            assert Scenario.from_toml(scenario.to_toml()) == scenario

    def test_loads(self, k4_config):
        sc = Scenario.load(k4_config)
        assert sc.law == "locked" and sc.distances[(3, 4)] == 5.0
        assert sc.system().spec.sq(3, 4) == 6.0

    @pytest.mark.parametrize("text", [
        K4_TOML.replace("distances_are_squared = true", ""),
        K4_TOML.replace('law = "locked"', 'law = "curved"'),
        K4_TOML.replace("alpha = 1.0", "alpha = 0.0"),
        K4_TOML + "\ncolour = 3\n",
        K4_TOML.replace('"3-4" = 5.0', '"3-4" = -5.0'),
        K4_TOML.replace('"1-2"', '"1-x"'),
        "law = [",
    ])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            Scenario.from_toml(text)

    def test_overrides(self):
        sc = PRESETS["k4-locked"].with_overrides(t_max=5.0, dt=0.01)
        assert (sc.integrator.t_max, sc.integrator.dt) == (5.0, 0.01)

    def test_explicit_init(self):
        sc = Scenario.from_toml(K4_TOML + '\n[init]\nkind = "explicit"\ncoords = [0, 0, 4, 0, 3, 4, 1, 3]\n')
        np.testing.assert_array_equal(sc.initial_state(), [0, 0, 4, 0, 3, 4, 1, 3, 1])


class TestCheckAndLift:
    def test_check_planar(self, k4_config):
        code, text = run("check", "--config", k4_config)
        assert code == EXIT_OK and "PlanarRealizable" in text

    def test_check_lifted(self, k4_config):
        code, text = run("check", "--config", k4_config, "--alpha", "1")
        assert code == EXIT_OK and "SpatialRealizable, det C = 2048" in text

    def test_check_infeasible(self, tmp_path):
        path = write(tmp_path, K4_TOML.replace("16.0", "1.0").replace("25.0", "1.0").replace("10.0", "9.0")
                     .replace("17.0", "1.0").replace("18.0", "1.0").replace("5.0", "1.0"))
        code, text = run("check", "--config", path)
        assert code == EXIT_INFEASIBLE and "violated" in text

    def test_lift(self, k4_config):
        code, text = run("lift", "--config", k4_config, "--alpha", "2")
        assert code == EXIT_OK
        lifted = Scenario.from_toml(K4_TOML.split("distances_are_squared")[0] + text.split("\n", 1)[1])
        assert [lifted.distances[e] for e in sorted(lifted.distances)] == [16, 25, 14, 17, 22, 9]

    def test_lift_zero_alpha(self, k4_config):
        assert run("lift", "--config", k4_config, "--alpha", "0")[0] == EXIT_CONFIG

    def test_missing_scenario(self):
        assert run("check")[0] == EXIT_CONFIG
        assert run("check", "--preset", "nope")[0] == EXIT_CONFIG
        assert run("check", "--config", "/nonexistent.toml")[0] == EXIT_CONFIG


class TestSimulate:
    def test_locked(self, k4_config, tmp_path):
        code, text = run("simulate", "--config", k4_config, "--out", str(tmp_path))
        assert code == EXIT_OK and "correct formation reached" in text
        report = json.loads((tmp_path / "k4_report.json").read_text())
        assert report["classification"] == "Correct"
        assert max(abs(v) for v in report["planar_errors"].values()) <= 1e-6
        header, data = read_trajectory_csv(tmp_path / "k4.csv")
        assert header[-2:] == ["p4z", "V"] and np.all(np.diff(data[:, -1]) <= 1e-10)

    def test_horizon_exit(self, k4_config, tmp_path):
        code, _ = run("simulate", "--config", k4_config, "--out", str(tmp_path), "--tmax", "0.01")
        assert code == EXIT_INTEGRATION

    def test_incorrect_message(self, tmp_path):
        code, text = run("simulate", "--preset", "five-agent-incorrect", "--out", str(tmp_path))
        assert code == EXIT_OK and "incorrect equilibrium (v = 0.3608" in text


class TestClassifyCommand:
    def test_from_trajectory(self, k4_config, tmp_path):
        run("simulate", "--config", k4_config, "--out", str(tmp_path))
        code, text = run("classify", "--config", k4_config, "--state", str(tmp_path / "k4.csv"),
                         "--out", str(tmp_path))
        assert code == EXIT_OK
        assert json.loads(text)["classification"] == "Correct"
        assert (tmp_path / "classify_report.json").exists()

    def test_far_from_equilibrium(self, k4_config, tmp_path):
        path = write(tmp_path, "0 0 1 0 2 0 3 0 1\n", "state.txt")
        code, text = run("classify", "--config", k4_config, "--state", path)
        assert code == EXIT_REFINEMENT and "best_state" in json.loads(text)

    def test_wrong_size(self, k4_config, tmp_path):
        path = write(tmp_path, "0 0 1\n", "state.txt")
        assert run("classify", "--config", k4_config, "--state", path)[0] == EXIT_CONFIG


class TestMonteCarloCommand:
    def test_locked(self, k4_config, tmp_path):
        code, text = run("montecarlo", "--config", k4_config, "--trials", "5", "--out", str(tmp_path))
        doc = json.loads(text)
        assert code == EXIT_OK and doc["n_correct"] == 5 and doc["witnesses"] == []

    def test_incorrect_exit(self, tmp_path):
        path = write(tmp_path, K4_TOML + '\n[init]\nkind = "explicit"\ncoords = [0, 0, 1, 0, 2, 0, 3, 0]\n')
        code, text = run("montecarlo", "--config", path, "--trials", "1")
        assert code == EXIT_INCORRECT and json.loads(text)["n_incorrect"] == 1


def test_reproduce_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("reproduce", "--out", str(a))[0] == EXIT_OK
    assert run("reproduce", "--out", str(b))[0] == EXIT_OK
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir()) and "summary.csv" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_start_at_target(tmp_path):
    path = write(tmp_path, K4_TOML + '\n[init]\nkind = "explicit"\ncoords = [0, 0, 4, 0, 3, 4, 1, 3]\n')
    code, text = run("simulate", "--config", path, "--out", str(tmp_path))
    assert code == EXIT_OK and "t = 0" in text
    assert len((tmp_path / "k4.csv").read_text().splitlines()) == 2
