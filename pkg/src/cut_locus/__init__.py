"""
src/cut_locus/__init__.py
-------------------------

Singular and conjugate points of the value function.

Modules:
- classify: point classification, classify maps, conjugate times
- branches: local smooth sheets near non-conjugate points
- second_variation: accessory second variation and the conjugate witness
- probes: Hessian blow-up and persistence of singularities
"""

from .branches import AnalyticSheet, Branch, BranchList, BranchSheet, local_branches
from .classify import (
    Classification,
    ClassifyTolerances,
    ConjugateTime,
    Kind,
    classify_map,
    classify_point,
    conjugate_time,
)
from .probes import BlowupSeries, PersistenceResult, hessian_blowup_probe, persistence_probe
from .second_variation import (
    Perturbation,
    SecondVariationReport,
    WitnessReport,
    accessory_second_variation,
    conjugate_witness,
)

__all__ = [
    "Kind",
    "Classification",
    "ClassifyTolerances",
    "classify_point",
    "classify_map",
    "ConjugateTime",
    "conjugate_time",
    "Branch",
    "BranchList",
    "BranchSheet",
    "AnalyticSheet",
    "local_branches",
    "Perturbation",
    "SecondVariationReport",
    "WitnessReport",
    "accessory_second_variation",
    "conjugate_witness",
    "BlowupSeries",
    "PersistenceResult",
    "hessian_blowup_probe",
    "persistence_probe",
]
