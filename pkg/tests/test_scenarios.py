import json
import os

import pytest

from src.errors import ConfigError, PreconditionError, ShootingError
from src.scenarios import DEFAULTS, load_config, parse_config, run_scenario
from src.scenarios.cli import main
from src.scenarios.config import load_environment

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")
TWO_BRANCH = {"family": "two_branch", "a1": 1.5, "a2": -0.5}


@pytest.fixture
def environment(tmp_path):
    return {"output_dir": str(tmp_path / "default"), "threads": 1, "log_level": "INFO"}


def write_config(tmp_path, config, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


# -------------------------------
# Config
# -------------------------------
def test_defaults_are_filled(environment):
    config = parse_config(json.dumps({"problem": {"family": "focusing"}}), environment=environment)
    assert config["task"] == DEFAULTS["task"]
    assert config["tolerances"]["tol_ri"] == 1e-6
    assert config["params"]["grid_per_dim"] == 11
    assert config["output_dir"] == environment["output_dir"]
    assert config["threads"] == 1


def test_invalid_json_reports_line(environment):
    with pytest.raises(ConfigError) as err:
        parse_config('{\n  "problem": {"family": "focusing"},\n  "seed": \n}', environment=environment)
    assert err.value.line == 4


def test_empty_box_names_field(environment):
    text = json.dumps({"problem": {"family": "focusing"}, "params": {"box": {"min": [1.0], "max": [-1.0]}}})
    with pytest.raises(ConfigError) as err:
        parse_config(text, environment=environment)
    assert err.value.field == "params.box.min"


def test_unknown_keys_are_rejected(environment):
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps({"problem": {"family": "focusing"}, "bogus": 1}), environment=environment)
    assert err.value.field == "<root>"
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps({"problem": {"family": "focusing"}, "params": {"horizon": -1}}),
                     environment=environment)
    assert err.value.field == "params.horizon"


def test_two_branch_needs_slopes(environment):
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps({"problem": {"family": "two_branch", "a1": 1.0}}), environment=environment)
    assert err.value.field == "problem.a1"


@pytest.mark.parametrize("override, field", [
    ("tol_kkt=0", "tolerances.tol_kkt"),
    ("tol_kkt=-1e-3", "tolerances.tol_kkt"),
    ("tol_unknown=1", "tolerances.tol_unknown"),
    ("tol_ri=abc", "tolerances.tol_ri"),
])
def test_bad_overrides(environment, override, field):
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps({"problem": {"family": "focusing"}}), [override], environment)
    assert err.value.field == field


def test_override_applies(environment):
    config = parse_config(json.dumps({"problem": {"family": "focusing"}}), ["tol_kkt=1e-11"], environment)
    assert config["tolerances"]["tol_kkt"] == 1e-11


def test_requested_task_must_match(environment):
    text = json.dumps({"task": "oracle", "problem": TWO_BRANCH})
    with pytest.raises(ConfigError) as err:
        parse_config(text, environment=environment, task="trace-singular")
    assert err.value.field == "task"
    filled = parse_config(json.dumps({"problem": TWO_BRANCH}), environment=environment, task="oracle")
    assert filled["task"] == "oracle"


def test_shipped_configs_parse(environment):
    for name in sorted(os.listdir(CONFIG_DIR)):
        config = load_config(os.path.join(CONFIG_DIR, name), environment=environment)
        assert config["problem"]["family"]


def test_environment_settings(monkeypatch):
    monkeypatch.setenv("HJSING_OUTPUT_DIR", "elsewhere")
    monkeypatch.setenv("HJSING_THREADS", "3")
    monkeypatch.setenv("HJSING_LOG_LEVEL", "debug")
    assert load_environment() == {"output_dir": "elsewhere", "threads": 3, "log_level": "DEBUG"}


# -------------------------------
# Scenarios
# -------------------------------
def test_trace_singular_scenario(tmp_path, environment):
    config = load_config(os.path.join(CONFIG_DIR, "two_branch_trace.json"), environment=environment)
    config["output_dir"] = str(tmp_path / "trace")
    manifest = run_scenario(config)
    assert manifest["exit_status"] == 0
    assert manifest["invariants"]["branch_equality"]["passed"]
    assert manifest["summary"]["interface_distance"] <= 1e-6
    for name in ("trace_singular.csv", "trace_singular.json", "manifest.json"):
        assert name in manifest["files"]
        assert (tmp_path / "trace" / name).exists()
    on_disk = json.loads((tmp_path / "trace" / "manifest.json").read_text())
    assert on_disk["failed_invariants"] == []


def test_trace_char_scenario(tmp_path, environment):
    config = parse_config(json.dumps({
        "task": "trace-char",
        "problem": {"family": "contact_discounted", "discount": 1.0, "datum": {"kind": "double_well"}},
        "params": {"seeds": [-0.5, 0.5], "horizon": 1.0},
        "output_dir": str(tmp_path / "char"),
    }), environment=environment)
    manifest = run_scenario(config)
    assert manifest["exit_status"] == 0
    assert manifest["summary"]["seeds"] == 2
    assert {"trace_char.csv", "trace_char_summary.csv"} <= set(manifest["files"])


def test_value_map_is_reproducible(tmp_path, environment):
    outputs = []
    for run in ("first", "second"):
        config = parse_config(json.dumps({
            "task": "value-map",
            "problem": TWO_BRANCH,
            "params": {"times": [0.5], "samples": 4, "grid_per_dim": 5},
            "seed": 3,
            "output_dir": str(tmp_path / run),
        }), environment=environment)
        manifest = run_scenario(config)
        assert manifest["exit_status"] == 0
        outputs.append((tmp_path / run / "value_map.csv").read_bytes())
    assert outputs[0] == outputs[1]


# -------------------------------
# Command Line
# -------------------------------
def test_cli_runs_trace(tmp_path):
    path = os.path.join(CONFIG_DIR, "two_branch_trace.json")
    assert main(["trace-singular", "--config", path, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "manifest.json").exists()


def test_cli_usage_errors(tmp_path):
    assert main(["no-such-command"]) == 2
    assert main(["oracle"]) == 2
    assert main(["oracle", "--config", str(tmp_path / "missing.json")]) == 2
    path = os.path.join(CONFIG_DIR, "two_branch_trace.json")
    assert main(["trace-singular", "--config", path, "--seed", "-1"]) == 2
    assert main(["trace-singular", "--config", path, "--threads", "0"]) == 2
    assert main(["oracle", "--config", path, "--out", str(tmp_path)]) == 2


def test_cli_maps_failures_to_exit_codes(tmp_path, mocker):
    path = os.path.join(CONFIG_DIR, "two_branch_trace.json")
    argv = ["trace-singular", "--config", path, "--out", str(tmp_path)]
    mocker.patch("src.scenarios.cli.run_scenario", side_effect=ShootingError("no root"))
    assert main(argv) == 3
    mocker.patch("src.scenarios.cli.run_scenario", side_effect=PreconditionError("k < 2", hypothesis="k >= 2"))
    assert main(argv) == 1
    mocker.patch("src.scenarios.cli.run_scenario", return_value={"exit_status": 1})
    assert main(argv) == 1


def test_cli_cfl_violation_keeps_partial_solution(tmp_path):
    path = write_config(tmp_path, {
        "task": "oracle",
        "problem": TWO_BRANCH,
        "params": {"box": {"min": [-1.0], "max": [1.0]}, "dx": 0.01, "dt": 0.1, "T": 1.0},
    })
    out = tmp_path / "oracle"
    assert main(["oracle", "--config", path, "--out", str(out)]) == 3
    assert (out / "oracle_partial.csv").exists()
