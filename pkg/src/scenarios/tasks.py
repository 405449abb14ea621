"""
src/scenarios/tasks.py
----------------------

Task runners behind the CLI. Each task builds the problem from a resolved
config, calls the library modules, writes its artifacts through an
ArtifactWriter and returns (summary, invariants). run_scenario wraps the
task and writes manifest.json.

Invariant records carry {"value", "limit", "passed", "hard"}; the exit
status is 1 iff a hard invariant failed. Advisory margins never change it.
"""

import logging

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.bolza.shooting import shoot_minimizers
from src.characteristics.flow import herglotz_report, integrate_variational
from src.cut_locus.classify import classify_map, conjugate_time
from src.errors import CflViolation, ConfigError, HJSingError
from src.grid_oracle.lax_friedrichs import compare, detect_singular_grid, lf_solve, singular_locations
from src.problem.families import build_problem
from src.scenarios.config import build_options
from src.scenarios.exporters import ArtifactWriter, describe
from src.singular.fixtures import two_branch_fixture
from src.singular.tracing import numeric_sheets, retrace_gap, trace_backward, trace_forward, trace_two_branch

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVARIANT = 1

# closed-form comparisons of the value map
VALUE_TOL = 1e-5


# -------------------------------
# Helpers
# -------------------------------
def build_scenario_problem(problem: dict):
    """
    ProblemSpec for a problem section, plus the TwoBranchFixture for the
    two_branch family (None otherwise).
    """
    if problem["family"] != "two_branch":
        return build_problem(problem), None
    options = {key: problem[key] for key in ("derivative_mode", "h_fd", "tol_dual", "smoothness_order")
               if key in problem}
    fixture = two_branch_fixture(problem["a1"], problem["a2"], problem.get("discount", 0.0),
                                 int(problem.get("dimension", 1)), **options)
    return fixture.spec, fixture


def invariant(value: float, limit: float, hard: bool = True) -> dict:
    value = float(value)
    return {"value": value, "limit": float(limit), "passed": bool(value <= limit), "hard": hard}


def _vector(value, n: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    return np.broadcast_to(v, (n,)).copy() if v.size == 1 else v


def _box(params: dict, n: int):
    box = params.get("box")
    if box is None:
        return -np.ones(n), np.ones(n)
    lo, hi = np.asarray(box["min"], dtype=float), np.asarray(box["max"], dtype=float)
    if lo.size != n:
        raise ConfigError(f"⛔ box has dimension {lo.size}, problem has {n}", field="params.box")
    return lo, hi


def _points(config: dict, n: int) -> np.ndarray:
    """Grid points of the box, or `samples` uniform points drawn with the run seed."""
    params = config["params"]
    lo, hi = _box(params, n)
    if "samples" in params:
        rng = np.random.default_rng(config["seed"])
        return lo + (hi - lo) * rng.random((params["samples"], n))
    axes = [np.linspace(a, b, params["points_per_axis"]) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _seeds(config: dict, n: int) -> np.ndarray:
    params = config["params"]
    if "seeds" in params:
        return np.array([_vector(s, n) for s in params["seeds"]])
    return _points(config, n)


def _start(params: dict, fixture, n: int):
    t0 = params.get("t0")
    if t0 is None:
        if fixture is None:
            raise ConfigError("⛔ trace-singular needs params.t0 and params.x0", field="params.t0")
        t0 = 0.5
    if "x0" in params:
        x0 = _vector(params["x0"], n)
    elif fixture is not None:
        x0 = fixture.interface(t0)
    else:
        raise ConfigError("⛔ trace-singular needs params.x0", field="params.x0")
    return float(t0), x0


def _sheets(spec, fixture, t0, x0, options):
    if fixture is not None:
        return None, fixture.sheets
    return numeric_sheets(spec, t0, x0, options["classify"], options["shooting"])


def _trace(spec, fixture, config, options):
    """Singular curve for the configured direction."""
    params = config["params"]
    t0, x0 = _start(params, fixture, spec.n)
    classification, sheets = _sheets(spec, fixture, t0, x0, options)
    horizon = params["horizon"]
    backward = params["horizon_backward"] or min(horizon, 0.5 * t0)
    tol = options["trace"]
    direction = params["direction"]
    logger.info(f"Tracing {direction} from ({t0}, {x0.tolist()}) with {len(sheets)} sheets")
    if direction == "forward":
        curve = trace_forward(spec, t0, x0, sheets, horizon, tol, classification)
    elif direction == "backward":
        curve = trace_backward(spec, t0, x0, sheets, backward, None, tol, classification)
    else:
        interface = fixture.interface if fixture is not None else None
        curve = trace_two_branch(spec, t0, x0, sheets, horizon, params["horizon_backward"], tol,
                                 classification, interface)
    return curve, sheets


# -------------------------------
# Tasks
# -------------------------------
def task_value_map(config: dict, writer: ArtifactWriter):
    spec, fixture = build_scenario_problem(config["problem"])
    options = build_options(config)
    times = config["params"].get("times", [1.0])
    points = _points(config, spec.n)

    rows = []
    jobs = [(float(t), x) for t in times for x in points]
    for t, x in tqdm(jobs, desc="value-map"):
        mset = shoot_minimizers(spec, t, x, options=options["shooting"])
        row = {"t": t, **{f"x{i + 1}": v for i, v in enumerate(x)}}
        if mset.empty:
            row.update({"u": np.nan, "k": 0, "min_abs_det": np.nan})
        else:
            row.update({"u": mset.u, "k": mset.k, "min_abs_det": mset.min_abs_det})
        if fixture is not None:
            row["u_exact"] = fixture.value(t, x)
        rows.append(row)
    frame = pd.DataFrame(rows)
    writer.csv(frame, "value_map.csv")

    failed = int(frame["u"].isna().sum())
    if failed:
        logger.warning(f"⚠️ shooting failed at {failed} of {len(frame)} points")
    summary = {"points": len(frame), "shooting_failures": failed, "stats": describe(frame)}
    invariants = {}
    if fixture is not None and failed < len(frame):
        error = float(np.nanmax(np.abs(frame["u"] - frame["u_exact"])))
        summary["max_closed_form_error"] = error
        invariants["closed_form_error"] = invariant(error, VALUE_TOL)
    return summary, invariants


def task_classify_map(config: dict, writer: ArtifactWriter):
    spec, _ = build_scenario_problem(config["problem"])
    options = build_options(config)
    times = config["params"].get("times", [1.0])
    frame = classify_map(spec, times, _points(config, spec.n), options["classify"], n_jobs=config["threads"])
    writer.csv(frame, "classify_map.csv")
    counts = frame["kind"].value_counts().sort_index().to_dict()
    return {"points": len(frame), "kinds": counts, "stats": describe(frame)}, {}


def task_trace_char(config: dict, writer: ArtifactWriter):
    spec, _ = build_scenario_problem(config["problem"])
    options = build_options(config)
    tol = config["tolerances"]
    horizon = config["params"]["horizon"]

    frames, rows = [], []
    for j, z in enumerate(tqdm(_seeds(config, spec.n), desc="trace-char")):
        var = integrate_variational(spec, z, horizon, options["control"])
        herglotz = herglotz_report(spec, var.char)
        frame = var.to_frame()
        frame.insert(0, "seed", j)
        frames.append(frame)
        rows.append({"seed": j, **{f"z{i + 1}": v for i, v in enumerate(z)},
                     "identity_residual": var.identity_residual(),
                     "euler_lagrange": herglotz.euler_lagrange, "momentum_gap": herglotz.momentum_gap,
                     "herglotz_residual": herglotz.residual, "bound": var.char.bounds(spec)["bound"]})
    writer.csv(pd.concat(frames, ignore_index=True), "trace_char.csv")
    table = pd.DataFrame(rows)
    writer.csv(table, "trace_char_summary.csv")

    identity = float(table["identity_residual"].max())
    herglotz = float(table["herglotz_residual"].max())
    summary = {"seeds": len(table), "max_identity_residual": identity, "max_herglotz_residual": herglotz}
    invariants = {"identity_residual": invariant(identity, tol["tol_identity"]),
                  "herglotz_residual": invariant(herglotz, tol["tol_herglotz"])}
    return summary, invariants


def task_conjugate_scan(config: dict, writer: ArtifactWriter):
    spec, _ = build_scenario_problem(config["problem"])
    options = build_options(config)
    horizon = config["params"]["horizon"]
    tol_conj = config["tolerances"]["tol_conj"]

    rows = []
    for z in tqdm(_seeds(config, spec.n), desc="conjugate-scan"):
        found = conjugate_time(spec, z, horizon, options["control"], tol_conj=tol_conj)
        row = {f"z{i + 1}": v for i, v in enumerate(z)}
        if found is None:
            row.update({"t_star": np.nan, "det_Xz": np.nan, "Uz_theta": np.nan, "Pz_theta": np.nan,
                        "detector": "none", "verified": False})
        else:
            row.update({"t_star": found.t_star, "det_Xz": found.det_Xz, "Uz_theta": found.Uz_theta,
                        "Pz_theta": found.Pz_theta, "detector": found.detector, "verified": found.verified})
        rows.append(row)
    frame = pd.DataFrame(rows)
    writer.csv(frame, "conjugate_scan.csv")

    hits = frame.dropna(subset=["t_star"])
    summary = {"seeds": len(frame), "conjugate": len(hits),
               "t_star_range": [float(hits["t_star"].min()), float(hits["t_star"].max())] if len(hits) else None}
    invariants = {}
    if len(hits):
        unverified = int((~hits["verified"].astype(bool)).sum())
        invariants["unverified_conjugate_times"] = invariant(unverified, 0, hard=False)
    return summary, invariants


def task_trace_singular(config: dict, writer: ArtifactWriter):
    spec, fixture = build_scenario_problem(config["problem"])
    options = build_options(config)
    curve, sheets = _trace(spec, fixture, config, options)

    writer.csv(curve.to_frame(), "trace_singular.csv")
    header = curve.header()
    if curve.direction == "forward" and curve.stop_time > curve.times[0]:
        try:
            header["retrace_gap"] = retrace_gap(spec, curve, sheets, options["trace"])
        except HJSingError as e:
            logger.warning(f"⚠️ backward retrace skipped: {e}")
    writer.json(header, "trace_singular.json")

    values = max(float(np.max(np.abs(s.values))) for s in curve.samples)
    limit = config["tolerances"]["tol_sing_rel"] * (1.0 + values)
    summary = {"stop_reason": curve.stop_reason, "stop_time": curve.stop_time, "samples": len(curve.samples),
               "max_equality_residual": curve.max_equality_residual}
    if "interface_distance" in curve.diagnostics:
        summary["interface_distance"] = curve.diagnostics["interface_distance"]
    if "retrace_gap" in header:
        summary["retrace_gap"] = header["retrace_gap"]
    return summary, {"branch_equality": invariant(curve.max_equality_residual, limit)}


def _solve_grid(spec, config, writer: ArtifactWriter):
    params = config["params"]
    if "box" not in params:
        raise ConfigError("⛔ the grid oracle needs params.box", field="params.box")
    box = _box(params, spec.n)
    try:
        return lf_solve(spec, box, params["dx"], params.get("dt"), params["T"], config["tolerances"]["cfl"],
                        params["save_every"])
    except CflViolation as e:
        if e.solution is not None:
            writer.csv(e.solution.to_frame(), "oracle_partial.csv")
        raise


def task_oracle(config: dict, writer: ArtifactWriter):
    spec, fixture = build_scenario_problem(config["problem"])
    sol = _solve_grid(spec, config, writer)
    params = config["params"]
    jump_tol = params.get("jump_tol", 10.0 * float(np.max(sol.dx)))

    writer.csv(sol.to_frame(), "oracle_slices.csv")
    writer.json(sol.metadata(), "oracle_meta.json")
    writer.csv(singular_locations(sol, jump_tol=jump_tol), "oracle_kinks.csv")

    summary = {"slices": int(sol.times.size), "cfl": sol.cfl, "advisory": sol.advisory}
    invariants = {}
    if fixture is not None:
        nodes = sol.nodes()
        points = [(sol.horizon, x) for x in nodes]
        stats = compare(sol, points, [fixture.value(sol.horizon, x) for x in nodes])
        summary["closed_form_max_error"] = stats["max"]
        summary["closed_form_mean_error"] = stats["mean"]
        invariants["closed_form_error"] = invariant(stats["max"], np.sqrt(float(np.max(sol.dx))), hard=False)
    return summary, invariants


def task_report(config: dict, writer: ArtifactWriter):
    """Traced singular curve against the grid-oracle kink cells."""
    spec, fixture = build_scenario_problem(config["problem"])
    options = build_options(config)
    params = config["params"]
    curve, _ = _trace(spec, fixture, config, options)
    sol = _solve_grid(spec, config, writer)
    jump_tol = params.get("jump_tol", 10.0 * float(np.max(sol.dx)))
    flags = detect_singular_grid(sol, jump_tol)

    t_from = curve.times[0] + params.get("report_from", 0.1)
    t_to = min(curve.times[-1], sol.horizon)
    rows = []
    for cells in flags:
        if not t_from <= cells.t <= t_to or not len(cells.points):
            continue
        traced = curve.position(cells.t)
        distance = float(np.min(np.max(np.abs(cells.points - traced), axis=1)))
        rows.append({"t": cells.t, **{f"x{i + 1}": v for i, v in enumerate(traced)},
                     "distance": distance, "flagged": len(cells.points)})
    frame = pd.DataFrame(rows, columns=["t"] + [f"x{i + 1}" for i in range(spec.n)] + ["distance", "flagged"])
    writer.csv(curve.to_frame(), "report_trace.csv")
    writer.csv(singular_locations(sol, flags), "report_kinks.csv")
    writer.csv(frame, "report_distance.csv")

    limit = 2.0 * float(np.max(sol.dx))
    if frame.empty:
        logger.warning("⚠️ no kink cells overlap the traced time range")
        return {"compared_slices": 0, "max_distance": None}, {"kink_coverage": invariant(1.0, 0.0)}
    distance = float(frame["distance"].max())
    summary = {"compared_slices": len(frame), "max_distance": distance, "mean_distance": float(frame["distance"].mean()),
               "t_range": [float(frame["t"].min()), float(frame["t"].max())], "stop_reason": curve.stop_reason}
    return summary, {"max_interface_distance": invariant(distance, limit)}


TASK_RUNNERS = {
    "value-map": task_value_map,
    "classify-map": task_classify_map,
    "trace-char": task_trace_char,
    "conjugate-scan": task_conjugate_scan,
    "trace-singular": task_trace_singular,
    "oracle": task_oracle,
    "report": task_report,
}


# -------------------------------
# Scenario Runner
# -------------------------------
def run_scenario(config: dict) -> dict:
    """
    Run the configured task and write its artifacts plus manifest.json.

    Args:
        config (dict): resolved config (see src.scenarios.config.parse_config)

    Returns:
        dict: manifest {"task", "config", "files", "summary", "invariants", "exit_status"}

    Raises:
        HJSingError: module failures propagate unchanged
    """
    writer = ArtifactWriter(config["output_dir"])
    task = config["task"]
    logger.info(f"Running task {task} into {config['output_dir']}")
    summary, invariants = TASK_RUNNERS[task](config, writer)

    failed = sorted(name for name, rec in invariants.items() if rec["hard"] and not rec["passed"])
    for name, rec in invariants.items():
        if not rec["passed"]:
            level = logging.ERROR if rec["hard"] else logging.WARNING
            logger.log(level, f"{'❌' if rec['hard'] else '⚠️'} invariant {name}: {rec['value']:.3e} > {rec['limit']:.3e}")
    status = EXIT_INVARIANT if failed else EXIT_OK
    manifest = {"task": task, "config": config, "files": writer.files + ["manifest.json"], "summary": summary,
                "invariants": invariants, "failed_invariants": failed, "exit_status": status}
    writer.json(manifest, "manifest.json")
    logger.info(f"✅ Task {task} finished with exit status {status}")
    return manifest
