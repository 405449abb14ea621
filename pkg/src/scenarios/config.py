"""
src/scenarios/config.py
-----------------------

Scenario config loading: JSON text validated against
data/schema/scenario_schema.json, defaults filled in, tolerance overrides
applied, and the option dataclasses of every module built from the result.
"""

import copy
import json
import logging
import os

from dotenv import load_dotenv
from jsonschema import Draft7Validator

from src.bolza.shooting import ShootingOptions
from src.characteristics.integrators import StepPolicy
from src.cut_locus.classify import ClassifyTolerances
from src.errors import ConfigError
from src.singular.tracing import TraceTolerances

logger = logging.getLogger(__name__)

SCHEMA_PATH = os.path.abspath(os.path.join(os.path.dirname(__file__), "../../data/schema/scenario_schema.json"))

TASKS = ("value-map", "classify-map", "trace-char", "conjugate-scan", "trace-singular", "oracle", "report")

DEFAULTS = {
    "task": "value-map",
    "params": {
        "points_per_axis": 11,
        "horizon": 2.0,
        "direction": "forward",
        "horizon_backward": 0.0,
        "grid_per_dim": 11,
        "method": "rk4",
        "revalidate_every": 25,
        "save_every": 1,
        "T": 1.0,
        "dx": 0.01,
    },
    "tolerances": {
        "step": 1e-2,
        "tol_ode": 1e-8,
        "tol_shoot_rel": 1e-10,
        "tie_rel": 1e-7,
        "dedupe_rel": 1e-4,
        "tol_conj": 1e-7,
        "tol_sing_rel": 1e-7,
        "tol_ri": 1e-6,
        "tol_kkt": 1e-9,
        "tol_rank": 1e-8,
        "face_tol": 1e-9,
        "trace_step": 1e-2,
        "tol_identity": 1e-7,
        "tol_herglotz": 1e-6,
        "cfl": 0.9,
    },
    "seed": 0,
}


# -------------------------------
# Environment
# -------------------------------
def load_environment() -> dict:
    """HJSING_* settings from the process environment (and a .env file when present)."""
    load_dotenv()
    return {
        "output_dir": os.getenv("HJSING_OUTPUT_DIR", "artifacts"),
        "threads": int(os.getenv("HJSING_THREADS", "1")),
        "log_level": os.getenv("HJSING_LOG_LEVEL", "INFO").upper(),
    }


# -------------------------------
# Schema Validation
# -------------------------------
def load_schema() -> dict:
    with open(SCHEMA_PATH, "r") as f:
        return json.load(f)


def validate(config: dict, schema: dict = None):
    """
    Validate against the scenario schema.

    Raises:
        ConfigError: the first violation, with its field path
    """
    validator = Draft7Validator(schema or load_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        error = errors[0]
        field = ".".join(str(p) for p in error.absolute_path) or "<root>"
        raise ConfigError(f"⛔ invalid config at '{field}': {error.message}", field=field)


def _check_semantics(config: dict):
    params = config.get("params", {})
    box = params.get("box")
    if box is not None:
        lo, hi = box["min"], box["max"]
        if len(lo) != len(hi):
            raise ConfigError("⛔ box min and max differ in length", field="params.box")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if a >= b:
                raise ConfigError(f"⛔ box min[{i}]={a} is not below max[{i}]={b}", field="params.box.min")
    problem = config["problem"]
    if problem["family"] == "two_branch" and ("a1" not in problem or "a2" not in problem):
        raise ConfigError("⛔ two_branch problems need a1 and a2", field="problem.a1")
    if problem["family"] == "custom_polynomial" and "hamiltonian_terms" not in problem:
        raise ConfigError("⛔ custom_polynomial problems need hamiltonian_terms", field="problem.hamiltonian_terms")


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_overrides(config: dict, overrides) -> dict:
    """Apply KEY=VAL tolerance overrides; every key must be a known tolerance."""
    config = copy.deepcopy(config)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"⛔ tolerance override must be KEY=VAL, got '{item}'", field="tolerances")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS["tolerances"]:
            raise ConfigError(f"⛔ unknown tolerance '{key}'", field=f"tolerances.{key}")
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"⛔ tolerance '{key}' is not a number: '{raw}'", field=f"tolerances.{key}")
        if value <= 0:
            raise ConfigError(f"⛔ tolerance '{key}' must be positive, got {value}", field=f"tolerances.{key}")
        config["tolerances"][key] = value
    return config


def parse_config(text: str, overrides=None, environment: dict = None, task: str = None) -> dict:
    """
    Parse, validate and resolve a scenario config.

    task is the task requested by the caller: it fills in a missing "task" key
    and must match a present one.

    Returns:
        dict: fully resolved config (every default filled in)

    Raises:
        ConfigError: JSON syntax error (with line), schema violation or semantic error (with field)
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"⛔ config is not valid JSON (line {e.lineno}): {e.msg}", line=e.lineno)
    if not isinstance(raw, dict):
        raise ConfigError("⛔ config must be a JSON object", field="<root>")
    validate(raw)
    _check_semantics(raw)
    if task is not None:
        if raw.setdefault("task", task) != task:
            raise ConfigError(f"⛔ requested task '{task}' does not match config task '{raw['task']}'",
                              field="task")

    environment = environment or load_environment()
    resolved = _merge(DEFAULTS, raw)
    resolved.setdefault("output_dir", environment["output_dir"])
    resolved.setdefault("threads", environment["threads"])
    resolved = apply_overrides(resolved, overrides)
    logger.info(f"✅ Config resolved: task={resolved['task']}, family={resolved['problem']['family']}")
    return resolved


def load_config(path: str, overrides=None, environment: dict = None, task: str = None) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"⛔ config file not found: {path}", field="--config")
    with open(path, "r") as f:
        return parse_config(f.read(), overrides, environment, task)


# -------------------------------
# Module Options
# -------------------------------
def build_options(config: dict) -> dict:
    """StepPolicy, ShootingOptions, ClassifyTolerances and TraceTolerances from a resolved config."""
    tol, params = config["tolerances"], config["params"]
    control = StepPolicy(method=params["method"], step=tol["step"], tol_ode=tol["tol_ode"])
    shooting = ShootingOptions(grid_per_dim=params["grid_per_dim"], tol_shoot_rel=tol["tol_shoot_rel"],
                               dedupe_rel=tol["dedupe_rel"], tie_rel=tol["tie_rel"], tol_conj=tol["tol_conj"],
                               control=control, n_jobs=config["threads"])
    classify = ClassifyTolerances(tol_conj=tol["tol_conj"], shooting=shooting)
    trace = TraceTolerances(tol_sing_rel=tol["tol_sing_rel"], tol_ri=tol["tol_ri"], tol_kkt=tol["tol_kkt"],
                            tol_conj=tol["tol_conj"], tol_rank=tol["tol_rank"], face_tol=tol["face_tol"],
                            step=tol["trace_step"], revalidate_every=params["revalidate_every"],
                            shooting=shooting)
    return {"control": control, "shooting": shooting, "classify": classify, "trace": trace}
