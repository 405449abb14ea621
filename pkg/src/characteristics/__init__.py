"""
src/characteristics/__init__.py
-------------------------------

Lie, variational and Caratheodory integration along characteristics.
"""

from .flow import (
    bump_check,
    caratheodory_solve,
    herglotz_report,
    herglotz_residual,
    initial_state,
    integrate_lie,
    integrate_variational,
    propagate,
    split_joint,
    split_lie,
)
from .integrators import StepPolicy
from .trajectories import CaratheodoryResult, CharTrajectory, SampledCurve, VarTrajectory

__all__ = [
    "StepPolicy",
    "CharTrajectory",
    "VarTrajectory",
    "SampledCurve",
    "CaratheodoryResult",
    "integrate_lie",
    "integrate_variational",
    "propagate",
    "bump_check",
    "caratheodory_solve",
    "herglotz_report",
    "herglotz_residual",
    "initial_state",
    "split_lie",
    "split_joint",
]
