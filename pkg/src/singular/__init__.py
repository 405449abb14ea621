"""
src/singular/__init__.py
------------------------

Strict singular characteristics.

Modules:
- faces: exposed faces of the superdifferential and geometric independence
- energy: minimal-energy element, non-degeneracy checks, minimax candidates
- tracing: forward / backward / two-branch tracing with stop monitors
- fixtures: closed-form two-branch problems
"""

from .energy import (
    EnergyMinimum,
    MinimaxCandidate,
    NondegeneracyReport,
    energy,
    minimal_energy_element,
    minimax_candidates,
    nondegeneracy_check,
)
from .faces import FaceSelection, exposed_face, independence_margin
from .fixtures import TwoBranchFixture, two_branch_fixture
from .tracing import (
    STOP_REASONS,
    SingularCurve,
    SingularSample,
    SingularTracer,
    TraceTolerances,
    numeric_sheets,
    retrace_gap,
    trace_backward,
    trace_forward,
    trace_two_branch,
)

__all__ = [
    "FaceSelection",
    "exposed_face",
    "independence_margin",
    "EnergyMinimum",
    "NondegeneracyReport",
    "MinimaxCandidate",
    "energy",
    "minimal_energy_element",
    "nondegeneracy_check",
    "minimax_candidates",
    "TwoBranchFixture",
    "two_branch_fixture",
    "STOP_REASONS",
    "TraceTolerances",
    "SingularSample",
    "SingularCurve",
    "SingularTracer",
    "trace_forward",
    "trace_backward",
    "trace_two_branch",
    "numeric_sheets",
    "retrace_gap",
]
