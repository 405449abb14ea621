"""
src/problem/spec.py
-------------------

ProblemSpec and the jet / consistency operations on it:
- hamiltonian_jet, lagrangian_jet
- legendre_residual
- check_problem (convexity, Legendre duality, finite-difference agreement)
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from src.problem.data import InitialDatum
from src.problem.hamiltonians import Hamiltonian, Lagrangian
from src.problem.jets import HamiltonianJet, LagrangianJet, finite_difference_jet, pack, unpack

logger = logging.getLogger(__name__)

DERIVATIVE_MODES = ("closed_form", "finite_difference")


# -------------------------------
# Problem Definition
# -------------------------------
@dataclass(frozen=True)
class ProblemSpec:
    """
    Contact Hamilton-Jacobi problem u_t + H(t,x,Du,u) = 0, u(0,.) = u0.

    Attributes:
        n (int): dimension of x
        hamiltonian (Hamiltonian): H with partials
        lagrangian (Lagrangian): Legendre dual L
        initial_datum (InitialDatum): u0 with gradient and Hessian
        smoothness_order (int): declared class C^R of H, L, u0 (R >= 2)
        derivative_mode (str): "closed_form" or "finite_difference"
        h_fd (float): relative finite-difference step
        tol_dual (float): Legendre residual tolerance
        family (str): family tag, for reports
        parameters (dict): family parameters, for reports
    """

    n: int
    hamiltonian: Hamiltonian
    lagrangian: Lagrangian
    initial_datum: InitialDatum
    smoothness_order: int = 2
    derivative_mode: str = "closed_form"
    h_fd: float = 1e-5
    tol_dual: float = 1e-8
    family: str = "custom"
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"⛔ dimension must be positive, got {self.n}")
        if self.smoothness_order < 2:
            raise ValueError(f"⛔ smoothness_order must be >= 2, got {self.smoothness_order}")
        if self.derivative_mode not in DERIVATIVE_MODES:
            raise ValueError(f"Unsupported derivative_mode: choose one of {DERIVATIVE_MODES}")
        for part in (self.hamiltonian, self.lagrangian, self.initial_datum):
            if part.n != self.n:
                raise ValueError(f"⛔ {type(part).__name__} has dimension {part.n}, expected {self.n}")

    def with_datum(self, datum: InitialDatum) -> "ProblemSpec":
        return replace(self, initial_datum=datum)

    def describe(self) -> dict:
        return {
            "family": self.family,
            "dimension": self.n,
            "parameters": self.parameters,
            "datum": self.initial_datum.describe(),
            "derivative_mode": self.derivative_mode,
            "smoothness_order": self.smoothness_order,
        }


# -------------------------------
# Jets
# -------------------------------
def hamiltonian_jet(spec: ProblemSpec, t, x, p, u, order: int = 1) -> HamiltonianJet:
    """
    Evaluate H and its partials at (t, x, p, u).

    Args:
        spec (ProblemSpec): problem
        t (float): time
        x, p (array-like): n-vectors
        u (float): value
        order (int): 0, 1 or 2

    Returns:
        HamiltonianJet: value, H_x, H_p, H_u and (order 2) all second partials

    Raises:
        DomainError: if any evaluated partial is non-finite
    """
    if order not in (0, 1, 2):
        raise ValueError(f"⛔ jet order must be 0, 1 or 2, got {order}")
    w = pack(x, p, u)
    value, grad, hess = spec.hamiltonian.packed(t, w, order, spec.derivative_mode, spec.h_fd)
    return HamiltonianJet(spec.n, value, grad, hess).check_finite("H")


def lagrangian_jet(spec: ProblemSpec, t, x, v, u, order: int = 1) -> LagrangianJet:
    """
    Evaluate L and its partials at (t, x, v, u).

    Returns:
        LagrangianJet: value, L_x, L_v, L_u and (order 2) L_vv, L_xx, L_xv, L_xu, L_vu, L_uu
    """
    if order not in (0, 1, 2):
        raise ValueError(f"⛔ jet order must be 0, 1 or 2, got {order}")
    w = pack(x, v, u)
    value, grad, hess = spec.lagrangian.packed(t, w, order, spec.derivative_mode, spec.h_fd)
    return LagrangianJet(spec.n, value, grad, hess).check_finite("L")


# -------------------------------
# Legendre Consistency
# -------------------------------
@dataclass(frozen=True)
class LegendreResidual:
    value_gap: float
    momentum_gap: float

    def __float__(self):
        return float(self.value_gap)


def legendre_residual(spec: ProblemSpec, t, x, p, u) -> LegendreResidual:
    """
    Residual of L(t,x,H_p,u) = p.H_p - H and of L_v(t,x,H_p,u) = p.

    Returns:
        LegendreResidual: value_gap >= 0 and momentum_gap (sup norm) >= 0
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    H = hamiltonian_jet(spec, t, x, p, u, order=1)
    L = lagrangian_jet(spec, t, x, H.p, u, order=1)
    value_gap = abs(L.value - (float(p @ H.p) - H.value))
    momentum_gap = float(np.max(np.abs(L.v - p)))
    return LegendreResidual(value_gap, momentum_gap)


# -------------------------------
# Problem Checks
# -------------------------------
@dataclass
class ProblemCheckReport:
    samples: int
    convex: bool
    max_legendre_residual: float
    max_derivative_gap: float
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures


def check_problem(spec: ProblemSpec, samples: int = 100, rng=None, radius: float = 2.0,
                  tol_fd: float = 1e-4) -> ProblemCheckReport:
    """
    Check the ProblemSpec invariants at random sample points.

    - H_pp positive definite (Cholesky succeeds)
    - Legendre residual <= tol_dual
    - closed-form partials agree with finite differences to tol_fd (when closed form exists)

    Args:
        spec (ProblemSpec): problem
        samples (int): number of sample points
        rng (np.random.Generator): random source
        radius (float): half-width of the sampling box in every argument

    Returns:
        ProblemCheckReport
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = spec.n
    failures = []
    convex = True
    max_dual = 0.0
    max_gap = 0.0
    for _ in range(samples):
        t = float(rng.uniform(0.0, radius))
        x = rng.uniform(-radius, radius, n)
        p = rng.uniform(-radius, radius, n)
        u = float(rng.uniform(-radius, radius))

        H = hamiltonian_jet(spec, t, x, p, u, order=2)
        try:
            np.linalg.cholesky(H.pp)
        except np.linalg.LinAlgError:
            convex = False
            failures.append({"check": "convexity", "t": t, "x": x.tolist(), "p": p.tolist(), "u": u})

        res = legendre_residual(spec, t, x, p, u)
        max_dual = max(max_dual, res.value_gap, res.momentum_gap)
        if max(res.value_gap, res.momentum_gap) > spec.tol_dual:
            failures.append({"check": "legendre", "t": t, "residual": max(res.value_gap, res.momentum_gap)})

        if spec.derivative_mode == "closed_form" and spec.hamiltonian.has_closed_form:
            w = pack(x, p, u)
            _, g_fd, h_fd = finite_difference_jet(
                lambda ww: spec.hamiltonian.value(t, *unpack(ww, n)), w, 2, spec.h_fd)
            gap = max(float(np.max(np.abs(g_fd - H.grad))), float(np.max(np.abs(h_fd - H.hess))))
            max_gap = max(max_gap, gap)
            if gap > tol_fd * (1.0 + float(np.max(np.abs(H.hess)))):
                failures.append({"check": "finite_difference", "t": t, "gap": gap})

    if failures:
        logger.warning(f"⚠️ Problem check found {len(failures)} failures ({spec.family})")
    else:
        logger.info(f"✅ Problem check passed on {samples} samples ({spec.family})")
    return ProblemCheckReport(samples, convex, max_dual, max_gap, failures)
