"""
src/problem/families.py
-----------------------

Built-in problem families and the config -> ProblemSpec builder.

Families:
- classical_quadratic: H = |p|^2/2, L = |v|^2/2
- contact_discounted:  H = |p|^2/2 + lam*u, L = |v|^2/2 - lam*u (lam > 0)
- focusing:            classical H with u0 = -c|x|^2/2
- custom_polynomial:   coefficient tables for H (and optionally L)
"""

import logging

from src.problem.data import (
    ConstantDatum,
    DoubleWellDatum,
    InitialDatum,
    LinearDatum,
    MinDatum,
    PolynomialDatum,
    QuadraticDatum,
)
from src.problem.hamiltonians import (
    LegendreLagrangian,
    PolynomialHamiltonian,
    PolynomialLagrangian,
    QuadraticHamiltonian,
    QuadraticLagrangian,
)
from src.problem.spec import ProblemSpec

logger = logging.getLogger(__name__)

FAMILIES = ("classical_quadratic", "contact_discounted", "focusing", "custom_polynomial")
DATUM_KINDS = ("linear", "constant", "quadratic", "double_well", "polynomial", "min")


# -------------------------------
# Family Constructors
# -------------------------------
def classical_quadratic(n: int = 1, datum: InitialDatum = None, **options) -> ProblemSpec:
    datum = LinearDatum([1.0] * n) if datum is None else datum
    return ProblemSpec(n, QuadraticHamiltonian(n), QuadraticLagrangian(n), datum,
                       family="classical_quadratic", parameters={}, **options)


def contact_discounted(n: int = 1, discount: float = 1.0, datum: InitialDatum = None,
                       **options) -> ProblemSpec:
    if discount <= 0:
        raise ValueError(f"⛔ contact_discounted requires discount > 0, got {discount}")
    datum = LinearDatum([1.0] * n) if datum is None else datum
    return ProblemSpec(n, QuadraticHamiltonian(n, discount), QuadraticLagrangian(n, discount), datum,
                       family="contact_discounted", parameters={"discount": discount}, **options)


def focusing(n: int = 1, curvature: float = 1.0, **options) -> ProblemSpec:
    """H = |p|^2/2 with u0 = -c|x|^2/2; all characteristics meet at x=0, t=1/c."""
    return ProblemSpec(n, QuadraticHamiltonian(n), QuadraticLagrangian(n), QuadraticDatum(n, curvature),
                       family="focusing", parameters={"curvature": curvature}, **options)


def custom_polynomial(n: int, hamiltonian_terms, datum: InitialDatum, lagrangian_terms=None,
                      **options) -> ProblemSpec:
    """
    Custom problem from coefficient tables.

    Without a Lagrangian table, L is the Legendre transform of H.
    """
    hamiltonian = PolynomialHamiltonian(n, hamiltonian_terms)
    if lagrangian_terms:
        lagrangian = PolynomialLagrangian(n, lagrangian_terms)
    else:
        lagrangian = LegendreLagrangian(hamiltonian)
    return ProblemSpec(n, hamiltonian, lagrangian, datum, family="custom_polynomial",
                       parameters={"hamiltonian_terms": list(hamiltonian_terms),
                                   "lagrangian_terms": list(lagrangian_terms or [])},
                       **options)


# -------------------------------
# Config Builder
# -------------------------------
def build_datum(config: dict, n: int) -> InitialDatum:
    """Build an initial datum from {"kind": ..., <parameters>}."""
    kind = config.get("kind", "linear")
    if kind == "linear":
        return LinearDatum(config.get("slope", [1.0] * n), config.get("offset", 0.0))
    if kind == "constant":
        return ConstantDatum(n, config.get("constant", 0.0))
    if kind == "quadratic":
        return QuadraticDatum(n, config.get("curvature", 1.0), config.get("center"))
    if kind == "double_well":
        return DoubleWellDatum(n)
    if kind == "polynomial":
        return PolynomialDatum(n, config.get("terms", []))
    if kind == "min":
        return MinDatum([build_datum(piece, n) for piece in config.get("pieces", [])])
    raise ValueError(f"Unsupported datum kind: {kind}. Choose one of {DATUM_KINDS}")


def build_problem(config: dict) -> ProblemSpec:
    """
    Build a ProblemSpec from a problem config section.

    Args:
        config (dict): {"family", "dimension", "discount", "curvature", "datum",
                        "hamiltonian_terms", "lagrangian_terms", "derivative_mode",
                        "h_fd", "tol_dual", "smoothness_order"}

    Returns:
        ProblemSpec
    """
    family = config.get("family", "classical_quadratic")
    n = int(config.get("dimension", 1))
    options = {key: config[key] for key in ("derivative_mode", "h_fd", "tol_dual", "smoothness_order")
               if key in config}
    datum = build_datum(config["datum"], n) if "datum" in config else None

    if family == "classical_quadratic":
        spec = classical_quadratic(n, datum, **options)
    elif family == "contact_discounted":
        spec = contact_discounted(n, config.get("discount", 1.0), datum, **options)
    elif family == "focusing":
        spec = focusing(n, config.get("curvature", 1.0), **options)
        if datum is not None:
            logger.warning("⚠️ focusing family ignores the supplied datum (u0 = -c|x|^2/2)")
    elif family == "custom_polynomial":
        if "hamiltonian_terms" not in config:
            raise ValueError("⛔ custom_polynomial requires hamiltonian_terms")
        datum = LinearDatum([0.0] * n) if datum is None else datum
        spec = custom_polynomial(n, config["hamiltonian_terms"], datum,
                                 config.get("lagrangian_terms"), **options)
    else:
        raise ValueError(f"Unsupported family: {family}. Choose one of {FAMILIES}")

    logger.info(f"✅ Built problem family={family} n={n} datum={spec.initial_datum.kind}")
    return spec
