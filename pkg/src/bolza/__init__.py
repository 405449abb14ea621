"""
src/bolza/__init__.py
---------------------

Value function, minimizer sets, fundamental solution and DPP certificates.
"""

from .dpp import DppCertificate, dpp_certificate, zigzag_curve
from .fundamental import (
    FundamentalSolutionResult,
    fundamental_solution,
    fundamental_solution_refined,
    value_by_curve_optimization,
)
from .shooting import (
    MinimizerEntry,
    MinimizerSet,
    ShootingOptions,
    default_box,
    newton_root,
    semiconcavity_probe,
    shoot_minimizers,
    value,
)

__all__ = [
    "ShootingOptions",
    "MinimizerEntry",
    "MinimizerSet",
    "default_box",
    "newton_root",
    "shoot_minimizers",
    "value",
    "semiconcavity_probe",
    "FundamentalSolutionResult",
    "fundamental_solution",
    "fundamental_solution_refined",
    "value_by_curve_optimization",
    "DppCertificate",
    "dpp_certificate",
    "zigzag_curve",
]
