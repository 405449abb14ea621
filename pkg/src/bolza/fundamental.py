"""
src/bolza/fundamental.py
------------------------

Fundamental solution h_L(t1, t2, x, y, u) by direct curve optimization.

h_L is the infimum over curves from x (at t1) to y (at t2) of u_xi(t2) - u,
where u_xi solves the Caratheodory equation with u_xi(t1) = u. Curves are
piecewise linear on m uniform nodes; the interior nodes are optimized with
BFGS from the straight segment. This oracle never touches the
characteristic system.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from src.characteristics.flow import caratheodory_solve, caratheodory_values
from src.characteristics.trajectories import CaratheodoryResult, SampledCurve
from src.errors import PreconditionError
from src.problem.spec import ProblemSpec, lagrangian_jet

logger = logging.getLogger(__name__)


@dataclass
class FundamentalSolutionResult:
    t1: float
    t2: float
    x: np.ndarray
    y: np.ndarray
    u_start: float
    curve: SampledCurve
    cost: float
    herglotz_residual: float
    path: CaratheodoryResult
    certified: bool
    iterations: int
    message: str = ""

    @property
    def nodes(self) -> int:
        return self.curve.s.size


def _discrete_herglotz(spec: ProblemSpec, curve: SampledCurve, u: np.ndarray) -> float:
    """Node-wise Euler-Lagrange defect of a piecewise-linear curve."""
    s, xi = curve.s, curve.xi
    if s.size < 3:
        return 0.0
    slopes = curve.slopes
    mids = 0.5 * (s[:-1] + s[1:])
    mid_xi = 0.5 * (xi[:-1] + xi[1:])
    mid_u = 0.5 * (u[:-1] + u[1:])
    momenta, forces = [], []
    for j in range(mids.size):
        L = lagrangian_jet(spec, mids[j], mid_xi[j], slopes[j], mid_u[j], order=1)
        momenta.append(L.v)
        forces.append(L.x + L.u * L.v)
    momenta, forces = np.array(momenta), np.array(forces)
    defect = (momenta[1:] - momenta[:-1]) / (mids[1:] - mids[:-1])[:, None] - 0.5 * (forces[1:] + forces[:-1])
    return float(np.max(np.abs(defect)))


def _build_curve(s, start, interior, end, n):
    xi = np.vstack([np.atleast_1d(start), np.reshape(interior, (-1, n)), np.atleast_1d(end)])
    return SampledCurve(s, xi)


# -------------------------------
# Pinned Endpoints
# -------------------------------
def fundamental_solution(spec: ProblemSpec, t1: float, t2: float, x, y, u_start: float, nodes: int = 9,
                         substeps: int = 2, initial=None, gtol: float = 1e-9, maxiter: int = 500,
                         tol_certify: float = 1e-6) -> FundamentalSolutionResult:
    """
    h_L(t1, t2, x, y, u_start) over piecewise-linear curves with `nodes` nodes.

    Args:
        initial (np.ndarray): warm start for the interior nodes, shape (nodes-2, n)

    Returns:
        FundamentalSolutionResult: certified=False when descent stagnates above tol_certify
    """
    if t2 <= t1:
        raise PreconditionError(f"⛔ h_L requires t2 > t1, got [{t1}, {t2}]", hypothesis="t2 > t1")
    if nodes < 3:
        raise PreconditionError(f"⛔ h_L requires at least 3 nodes, got {nodes}", hypothesis="m >= 3")
    n = spec.n
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    s = np.linspace(t1, t2, nodes)
    if initial is None:
        weights = (s[1:-1] - t1) / (t2 - t1)
        initial = x[None, :] + weights[:, None] * (y - x)[None, :]

    def cost(flat):
        curve = _build_curve(s, x, flat, y, n)
        return caratheodory_values(spec, curve, u_start, substeps)[-1] - u_start

    res = minimize(cost, np.ravel(initial), method="BFGS", options={"gtol": gtol, "maxiter": maxiter})
    gradient = float(np.max(np.abs(res.jac))) if res.jac is not None and res.jac.size else 0.0
    certified = bool(res.success or gradient <= tol_certify)

    curve = _build_curve(s, x, res.x, y, n)
    path = caratheodory_solve(spec, curve, u_start, substeps)
    h_L = path.terminal - u_start
    residual = _discrete_herglotz(spec, curve, path.u)
    if not certified:
        logger.warning(f"⚠️ h_L descent stagnated (|grad|={gradient:.2e}): {res.message}")
    logger.debug(f"h_L({t1}, {t2}, {x.tolist()}, {y.tolist()}) = {h_L:.10g} with m={nodes}")
    return FundamentalSolutionResult(t1, t2, x, y, float(u_start), curve, float(h_L), residual, path,
                                     certified, int(res.nit), str(res.message))


# -------------------------------
# Nested Refinement
# -------------------------------
@dataclass
class RefinedFundamentalSolution:
    results: list
    extrapolated: float
    monotone: bool
    certified: bool

    @property
    def costs(self) -> list:
        return [r.cost for r in self.results]

    @property
    def best(self) -> FundamentalSolutionResult:
        return self.results[-1]


def fundamental_solution_refined(spec: ProblemSpec, t1: float, t2: float, x, y, u_start: float,
                                 levels=(5, 9, 17), substeps: int = 2) -> RefinedFundamentalSolution:
    """
    h_L on nested node counts (interval doubling), warm-started level to level.

    The finest two levels give an order-2 Richardson extrapolation. The result
    is certified when costs are non-increasing (up to 1e-10), successive
    differences shrink and every level is certified.
    """
    levels = sorted(int(m) for m in levels)
    results = []
    for m in levels:
        initial = None
        if results:
            prev = results[-1].curve
            s = np.linspace(t1, t2, m)[1:-1]
            initial = np.stack([np.interp(s, prev.s, prev.xi[:, k]) for k in range(spec.n)], axis=1)
        results.append(fundamental_solution(spec, t1, t2, x, y, u_start, m, substeps, initial))

    costs = [r.cost for r in results]
    diffs = np.abs(np.diff(costs))
    monotone = all(b <= a + 1e-10 for a, b in zip(costs[:-1], costs[1:]))
    shrinking = all(d2 <= d1 + 1e-12 for d1, d2 in zip(diffs[:-1], diffs[1:]))
    extrapolated = costs[-1] + (costs[-1] - costs[-2]) / 3.0 if len(costs) > 1 else costs[-1]
    certified = monotone and shrinking and all(r.certified for r in results)
    logger.info(f"✅ h_L refinement {dict(zip(levels, np.round(costs, 10)))}, certified={certified}")
    return RefinedFundamentalSolution(results, float(extrapolated), monotone, certified)


# -------------------------------
# Free Left Endpoint
# -------------------------------
@dataclass
class CurveValueResult:
    value: float
    y_star: np.ndarray
    fundamental: FundamentalSolutionResult
    certified: bool


def value_by_curve_optimization(spec: ProblemSpec, t: float, x, nodes: int = 17, y0=None,
                                substeps: int = 2, gtol: float = 1e-9,
                                tol_certify: float = 1e-6) -> CurveValueResult:
    """
    u(t,x) = min_y { u0(y) + h_L(0, t, y, x, u0(y)) } over piecewise-linear curves.

    The left endpoint y is optimized jointly with the interior nodes.
    """
    if t <= 0:
        raise PreconditionError(f"⛔ curve optimization requires t > 0, got {t}", hypothesis="t > 0")
    n = spec.n
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y_init = x.copy() if y0 is None else np.atleast_1d(np.asarray(y0, dtype=float))
    s = np.linspace(0.0, t, nodes)
    weights = s[1:-1] / t
    interior = y_init[None, :] + weights[:, None] * (x - y_init)[None, :]
    datum = spec.initial_datum

    def cost(flat):
        y = flat[:n]
        curve = _build_curve(s, y, flat[n:], x, n)
        return caratheodory_values(spec, curve, datum.value(y), substeps)[-1]

    res = minimize(cost, np.concatenate([y_init, interior.ravel()]), method="BFGS",
                   options={"gtol": gtol, "maxiter": 1000})
    gradient = float(np.max(np.abs(res.jac))) if res.jac is not None else 0.0
    y_star = res.x[:n]
    u_start = float(datum.value(y_star))
    fundamental = fundamental_solution(spec, 0.0, t, y_star, x, u_start, nodes, substeps,
                                       initial=np.reshape(res.x[n:], (-1, n)))
    certified = bool((res.success or gradient <= tol_certify) and fundamental.certified)
    return CurveValueResult(u_start + fundamental.cost, y_star, fundamental, certified)
