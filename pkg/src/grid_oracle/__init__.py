"""
src/grid_oracle/__init__.py
---------------------------

Finite-difference oracle for cross-validating values and kink locations.
"""

from .lax_friedrichs import (
    GridCells,
    GridSolution,
    compare,
    convergence_ratio,
    detect_singular_grid,
    lf_solve,
    singular_locations,
)

__all__ = [
    "GridSolution",
    "GridCells",
    "lf_solve",
    "detect_singular_grid",
    "singular_locations",
    "compare",
    "convergence_ratio",
]
