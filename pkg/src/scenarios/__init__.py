"""
src/scenarios/__init__.py
-------------------------

Scenario runner: JSON configs in, CSV/JSON artifacts and a manifest out.
"""

from .config import DEFAULTS, TASKS, apply_overrides, build_options, load_config, parse_config
from .exporters import ArtifactWriter
from .tasks import TASK_RUNNERS, build_scenario_problem, run_scenario

__all__ = [
    "DEFAULTS",
    "TASKS",
    "apply_overrides",
    "build_options",
    "load_config",
    "parse_config",
    "ArtifactWriter",
    "TASK_RUNNERS",
    "build_scenario_problem",
    "run_scenario",
]
