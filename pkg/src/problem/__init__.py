"""
src/problem/__init__.py
-----------------------

Contact Hamilton-Jacobi problem definitions.

Modules:
- jets: packed derivative jets and the finite-difference fallback
- hamiltonians: Hamiltonian / Lagrangian families
- data: initial data u0
- spec: ProblemSpec, jets, Legendre residual, problem checks
- families: built-in families and the config builder
"""

from .data import (
    ConstantDatum,
    DoubleWellDatum,
    InitialDatum,
    LinearDatum,
    MinDatum,
    PolynomialDatum,
    QuadraticDatum,
)
from .families import build_datum, build_problem, classical_quadratic, contact_discounted, custom_polynomial, focusing
from .hamiltonians import (
    Hamiltonian,
    Lagrangian,
    LegendreLagrangian,
    PolynomialHamiltonian,
    PolynomialLagrangian,
    QuadraticHamiltonian,
    QuadraticLagrangian,
)
from .jets import HamiltonianJet, LagrangianJet
from .spec import ProblemSpec, check_problem, hamiltonian_jet, lagrangian_jet, legendre_residual

__all__ = [
    "ProblemSpec",
    "hamiltonian_jet",
    "lagrangian_jet",
    "legendre_residual",
    "check_problem",
    "build_problem",
    "build_datum",
    "classical_quadratic",
    "contact_discounted",
    "focusing",
    "custom_polynomial",
    "Hamiltonian",
    "Lagrangian",
    "LegendreLagrangian",
    "PolynomialHamiltonian",
    "PolynomialLagrangian",
    "QuadraticHamiltonian",
    "QuadraticLagrangian",
    "HamiltonianJet",
    "LagrangianJet",
    "InitialDatum",
    "LinearDatum",
    "ConstantDatum",
    "QuadraticDatum",
    "DoubleWellDatum",
    "PolynomialDatum",
    "MinDatum",
]
