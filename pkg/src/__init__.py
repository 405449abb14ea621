"""
src/__init__.py
---------------

Initialize the HJ-Sing src package.

This package contains the core modules of HJ-Sing:
- problem: Hamiltonians, Lagrangians, initial data and problem families
- characteristics: Lie and variational characteristic systems
- bolza: value function by shooting and curve optimization
- cut_locus: point classification, conjugate times and branch sheets
- singular: strict singular characteristics
- grid_oracle: Lax-Friedrichs reference solver
- scenarios: config-driven CLI
"""
# Nothing needed for now; package initialization
