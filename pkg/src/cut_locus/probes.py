"""
src/cut_locus/probes.py
-----------------------

Probes near the cut locus:
- hessian_blowup_probe: |D^2u(t, X(t;z0))| = |P_z X_z^{-1}| as t approaches a conjugate time
- persistence_probe: a singular point at time t0+eps inside the ball B_{eps M}(x0)
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from src.bolza.shooting import ShootingOptions, shoot_minimizers
from src.characteristics.flow import integrate_variational
from src.characteristics.integrators import StepPolicy
from src.cut_locus.branches import BranchSheet
from src.cut_locus.classify import Classification, ClassifyTolerances, classify_point
from src.errors import PreconditionError, ShootingError
from src.problem.spec import ProblemSpec

logger = logging.getLogger(__name__)


# -------------------------------
# Hessian Blow-up
# -------------------------------
@dataclass
class BlowupSeries:
    times: np.ndarray
    norms: np.ndarray
    truncated_at: Optional[float]

    @property
    def increasing(self) -> bool:
        return bool(np.all(np.diff(self.norms) >= -1e-12))


def hessian_blowup_probe(spec: ProblemSpec, z0, t0: float, times, control: StepPolicy = None,
                         max_condition: float = 1e12, tol_conj: float = 1e-6) -> BlowupSeries:
    """
    Series |D^2u(t, X(t; z0))|_2 with D^2u = P_z X_z^{-1} at the requested times.

    The series is truncated at the first time where X_z is numerically singular.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] <= 0:
        raise ValueError("⛔ probe times must be positive and increasing")
    control = control or StepPolicy()
    horizon = max(float(times[-1]), float(t0))
    grid = control.grid_through(0.0, horizon, times)
    var = integrate_variational(spec, z0, horizon, control, grid=grid)
    det_t0 = var.det_Xz()[np.argmin(np.abs(grid - t0))]
    if abs(det_t0) > tol_conj:
        logger.warning(f"⚠️ |det X_z({t0})| = {abs(det_t0):.3e}: t0 does not look conjugate along z0")

    norms, truncated_at = [], None
    for t in times:
        j = int(np.flatnonzero(grid == t)[0])
        Xz, Pz = var.Xz[j], var.Pz[j]
        if np.linalg.cond(Xz) > max_condition:
            truncated_at = float(t)
            logger.warning(f"⚠️ X_z singular at t={t}; blow-up series truncated")
            break
        norms.append(float(np.linalg.norm(Pz @ np.linalg.inv(Xz), ord=2)))
    kept = times[:len(norms)]
    return BlowupSeries(kept, np.array(norms), truncated_at)


# -------------------------------
# Persistence of Singularities
# -------------------------------
@dataclass
class PersistenceResult:
    found: bool
    t: float
    x: Optional[np.ndarray]
    k: int
    depth: int
    detector: str
    diagnostics: dict = field(default_factory=dict)


def _ball_grid(x0, radius, points):
    axes = [np.linspace(c - radius, c + radius, points) for c in x0]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    inside = np.linalg.norm(grid - x0, axis=1) <= radius * (1 + 1e-12)
    return grid, mesh[0].shape, inside


def _seed_jump(a, b, dx):
    """Minimizing seeds of neighbours a, b differ by more than their smooth variation allows."""
    if a is None or b is None:
        return False
    scale = 1.0 / max(min(abs(a.det_Xz), abs(b.det_Xz)), 1e-3)
    return float(np.max(np.abs(a.seed - b.seed))) > 3.0 * dx * scale


def persistence_probe(spec: ProblemSpec, t0: float, x0, eps: float, M: float, points: int = 9,
                      max_depth: int = 4, tolerances: ClassifyTolerances = None,
                      classification: Classification = None, oracle=None,
                      jump_tol: float = None) -> PersistenceResult:
    """
    Find x_eps in B_{eps M}(x0) with (t0 + eps, x_eps) singular.

    The ball is scanned on a grid (refined by doubling up to max_depth). A hit
    is either a grid point with k >= 2 minimizers or a pair of neighbours whose
    minimizing seeds jump; a jump is resolved by brentq on the difference of
    the two continued sheet values and confirmed by shooting (k >= 2). When
    nothing is found and a GridSolution is supplied, its slope-jump cells in the
    ball are used instead.

    Raises:
        PreconditionError: (t0, x0) is not singular, or eps > min(1, 1/M)
    """
    tolerances = tolerances or ClassifyTolerances()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if eps <= 0 or eps > min(1.0, 1.0 / M) + 1e-15:
        raise PreconditionError(f"⛔ need 0 < eps <= min(1, 1/M), got eps={eps}, M={M}",
                                hypothesis="eps <= min(1, 1/M)")
    classification = classification or classify_point(spec, t0, x0, tolerances)
    if not classification.kind.singular:
        raise PreconditionError(f"⛔ ({t0}, {x0.tolist()}) is {classification.kind.value}, not singular",
                                hypothesis="(t0, x0) in the cut locus")

    t1 = t0 + eps
    radius = eps * M
    options: ShootingOptions = tolerances.shooting
    for depth in range(max_depth):
        count = (points - 1) * 2 ** depth + 1
        grid, shape, inside = _ball_grid(x0, radius, count)
        dx = 2.0 * radius / (count - 1)
        best = {}
        for i in np.flatnonzero(inside):
            mset = shoot_minimizers(spec, t1, grid[i], options=options)
            if mset.k >= 2 or (mset.root_continuum and mset.k >= 1):
                logger.info(f"✅ Persistence hit at t={t1}, x={grid[i].tolist()} (k={mset.k}, depth={depth})")
                return PersistenceResult(True, t1, grid[i].copy(), mset.k, depth, "minimizers")
            best[i] = mset.minimizing[0] if mset.k else None

        index = np.arange(grid.shape[0]).reshape(shape)
        for axis in range(x0.size):
            first = np.moveaxis(index, axis, 0)
            for a, b in zip(first[:-1].ravel(), first[1:].ravel()):
                if a not in best or b not in best or not _seed_jump(best[a], best[b], dx):
                    continue
                hit = _resolve_jump(spec, t1, grid[a], grid[b], best[a], best[b], options)
                if hit is not None:
                    return PersistenceResult(True, t1, hit[0], hit[1], depth, "seed_jump")

    if oracle is not None:
        hit = _oracle_hit(oracle, t1, x0, radius, jump_tol)
        if hit is not None:
            return PersistenceResult(True, t1, hit, 0, max_depth, "grid_slope_jump")

    diagnostics = {"radius": radius, "final_points_per_axis": (points - 1) * 2 ** (max_depth - 1) + 1,
                   "tie_rel": options.tie_rel, "grid_per_dim": options.grid_per_dim}
    logger.warning(f"⚠️ Persistence probe exhausted at depth {max_depth}: {diagnostics}")
    return PersistenceResult(False, t1, None, 0, max_depth, "none", diagnostics)


def _resolve_jump(spec, t, xa, xb, entry_a, entry_b, options):
    sheet_a = BranchSheet(spec, entry_a.seed, 0, options)
    sheet_b = BranchSheet(spec, entry_b.seed, 1, options)

    def gap(lam):
        x = xa + lam * (xb - xa)
        return sheet_a.evaluate(t, x).value - sheet_b.evaluate(t, x).value

    try:
        g0, g1 = gap(0.0), gap(1.0)
        if g0 * g1 > 0:
            return None
        lam = brentq(gap, 0.0, 1.0, xtol=1e-14)
    except ShootingError:
        return None
    x = xa + lam * (xb - xa)
    mset = shoot_minimizers(spec, t, x, options=options)
    if mset.k >= 2:
        logger.info(f"✅ Persistence hit at t={t}, x={x.tolist()} from a seed jump")
        return x, mset.k
    return None


def _oracle_hit(oracle, t, x0, radius, jump_tol):
    from src.grid_oracle.lax_friedrichs import detect_singular_grid

    tol = jump_tol if jump_tol is not None else 10.0 * float(np.max(oracle.dx))
    j = int(np.argmin(np.abs(oracle.times - t)))
    cells = detect_singular_grid(oracle, tol, slices=[j])[0]
    if not len(cells.points):
        return None
    distance = np.linalg.norm(cells.points - x0, axis=1)
    inside = distance <= radius
    if not np.any(inside):
        return None
    pick = np.flatnonzero(inside)[np.argmax(cells.jumps[inside])]
    return cells.points[pick].copy()
