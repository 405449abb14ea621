"""
src/bolza/shooting.py
---------------------

Value function u(t,x) = min { U(t;z) : X(t;z) = x } by multi-start shooting.

Seeds come from a uniform grid on a search box; each seed is refined by damped
Newton on z -> X(t;z) - x with X_z from the variational system. Converged
roots are deduplicated in grid order, sorted by U, and the minimizing subset
is flagged with a tie tolerance.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.characteristics.flow import integrate_variational
from src.characteristics.integrators import StepPolicy
from src.errors import PreconditionError, ShootingError
from src.problem.spec import ProblemSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShootingOptions:
    """
    Multi-start shooting controls.

    Attributes:
        grid_per_dim (int): seeds per coordinate
        box_half_width (float): fixed half-width; None uses the default box
        max_iter (int): Newton iterations per seed
        tol_shoot_rel (float): |X(t;z) - x| <= tol_shoot_rel * (1 + |x|)
        polish_rel (float): Newton keeps polishing while |step| > polish_rel * (1 + |z|)
        dedupe_rel (float): dedupe radius as a fraction of the box width
        tie_rel (float): tie tolerance tie_rel * (1 + |u|)
        tol_conj (float): |det X_z| threshold
        control (StepPolicy): characteristic integration
        n_jobs (int): joblib workers for the seed loop
    """

    grid_per_dim: int = 11
    box_half_width: Optional[float] = None
    max_iter: int = 40
    tol_shoot_rel: float = 1e-10
    polish_rel: float = 1e-12
    dedupe_rel: float = 1e-4
    tie_rel: float = 1e-7
    tol_conj: float = 1e-7
    control: StepPolicy = StepPolicy()
    n_jobs: int = 1


@dataclass
class MinimizerEntry:
    seed: np.ndarray
    start: np.ndarray
    U: float
    residual: float
    det_Xz: float
    P: np.ndarray
    iterations: int
    minimizing: bool = False


@dataclass
class MinimizerSet:
    """Roots of X(t;z) = x found from the seed grid, sorted by U."""

    t: float
    x: np.ndarray
    entries: list
    box: tuple
    grid_per_dim: int
    discarded: int = 0
    root_continuum: bool = False
    diagnostic: str = ""
    tie_tol: float = field(default=0.0)

    @property
    def empty(self) -> bool:
        return not self.entries

    @property
    def u(self) -> float:
        return self.entries[0].U if self.entries else float("nan")

    @property
    def minimizing(self) -> list:
        return [e for e in self.entries if e.minimizing]

    @property
    def k(self) -> int:
        return len(self.minimizing)

    @property
    def min_abs_det(self) -> float:
        dets = [abs(e.det_Xz) for e in self.minimizing]
        return min(dets) if dets else float("nan")

    def to_frame(self) -> pd.DataFrame:
        n = self.x.size
        rows = []
        for e in self.entries:
            row = {f"z{i + 1}": e.seed[i] for i in range(n)}
            row.update({"U": e.U, "residual": e.residual, "det_Xz": e.det_Xz,
                        "iterations": e.iterations, "minimizing": e.minimizing})
            rows.append(row)
        return pd.DataFrame(rows)


# -------------------------------
# Search Box and Seeds
# -------------------------------
def default_box(spec: ProblemSpec, t: float, x, half_width: float = None):
    """Box centred at x with half-width max(2, 2t(1 + |Du0(x)|)) per coordinate."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if half_width is None:
        slope = float(np.max(np.abs(spec.initial_datum.piece_at(x).gradient(x))))
        half_width = max(2.0, 2.0 * t * (1.0 + slope))
    return x - half_width, x + half_width


def seed_grid(lo, hi, per_dim: int) -> np.ndarray:
    """Uniform seed grid in lexicographic grid-index order, shape (per_dim**n, n)."""
    axes = [np.linspace(a, b, per_dim) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


# -------------------------------
# Damped Newton
# -------------------------------
def _pseudo_solve(A: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Newton step A^+ r; singular directions are dropped."""
    U, S, Vt = np.linalg.svd(A)
    cutoff = 1e-12 * max(1.0, float(S.max()))
    S_inv = np.where(S > cutoff, 1.0 / np.where(S > cutoff, S, 1.0), 0.0)
    return Vt.T @ (S_inv * (U.T @ r))


def _terminal(spec, t, z, control):
    var = integrate_variational(spec, z, t, control, cross_check=False)
    X, P, U = var.char.terminal
    return X, P, U, var.Xz[-1]


def newton_root(spec: ProblemSpec, t: float, x, z0, options: ShootingOptions = None) -> Optional[MinimizerEntry]:
    """
    Damped Newton on z -> X(t;z) - x from z0.

    Backtracking halves the step until |X - x| decreases. Returns None when
    the iteration diverges or stalls above tolerance.
    """
    options = options or ShootingOptions()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    tol = options.tol_shoot_rel * (1.0 + float(np.max(np.abs(x))))
    control = options.control

    X, P, U, Xz = _terminal(spec, t, z, control)
    r = X - x
    iterations = 0
    for iterations in range(1, options.max_iter + 1):
        rn = float(np.max(np.abs(r)))
        step = _pseudo_solve(Xz, r)
        # degenerate (conjugate) roots converge linearly, so polishing continues past tol
        if rn <= tol and float(np.max(np.abs(step))) <= options.polish_rel * (1.0 + float(np.max(np.abs(z)))):
            break
        accepted = False
        lam = 1.0
        for _ in range(30):
            candidate = z - lam * step
            Xc, Pc, Uc, Xzc = _terminal(spec, t, candidate, control)
            rc = float(np.max(np.abs(Xc - x)))
            if rc < rn or (rn <= tol and rc <= tol):
                z, X, P, U, Xz, r = candidate, Xc, Pc, Uc, Xzc, Xc - x
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break

    rn = float(np.max(np.abs(r)))
    if rn > tol:
        logger.debug(f"Newton from z0={np.round(z0, 6)} stopped at residual {rn:.3e}")
        return None
    return MinimizerEntry(z, np.atleast_1d(np.asarray(z0, dtype=float)), float(U), rn,
                          float(np.linalg.det(Xz)), P, iterations)


# -------------------------------
# Multi-start Shooting
# -------------------------------
def shoot_minimizers(spec: ProblemSpec, t: float, x, box=None, grid_per_dim: int = None,
                     options: ShootingOptions = None) -> MinimizerSet:
    """
    Minimizer set of (t, x) by multi-start shooting.

    Args:
        spec (ProblemSpec): problem
        t (float): time, t > 0
        x (array-like): point
        box (tuple): (lo, hi) search box; default box when None
        grid_per_dim (int): seeds per coordinate (overrides options)
        options (ShootingOptions): controls

    Returns:
        MinimizerSet: possibly empty, with a diagnostic
    """
    options = options or ShootingOptions()
    if t <= 0:
        raise PreconditionError(f"⛔ shooting requires t > 0, got {t}", hypothesis="t > 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    per_dim = int(grid_per_dim or options.grid_per_dim)
    lo, hi = default_box(spec, t, x, options.box_half_width) if box is None else box
    lo, hi = np.atleast_1d(np.asarray(lo, dtype=float)), np.atleast_1d(np.asarray(hi, dtype=float))
    if np.any(lo >= hi):
        raise PreconditionError(f"⛔ empty search box {lo.tolist()} .. {hi.tolist()}", hypothesis="box nonempty")

    seeds = seed_grid(lo, hi, per_dim)
    results = Parallel(n_jobs=options.n_jobs)(
        delayed(newton_root)(spec, t, x, z0, options) for z0 in seeds
    )
    roots = [r for r in results if r is not None]
    discarded = len(results) - len(roots)

    root_continuum = (len(seeds) > 1 and len(roots) == len(seeds)
                      and all(abs(r.det_Xz) <= options.tol_conj for r in roots))

    radius = options.dedupe_rel * float(np.max(hi - lo))
    kept = []
    for root in roots:
        if all(np.max(np.abs(root.seed - k.seed)) >= radius for k in kept):
            kept.append(root)
    kept.sort(key=lambda e: e.U)

    diagnostic = ""
    tie_tol = 0.0
    if kept:
        tie_tol = options.tie_rel * (1.0 + abs(kept[0].U))
        for e in kept:
            e.minimizing = e.U - kept[0].U <= tie_tol
    else:
        diagnostic = "no root of X(t;z)=x in the search box; box likely too small"
        logger.warning(f"⚠️ Shooting at t={t}, x={x.tolist()}: {diagnostic}")

    mset = MinimizerSet(t, x, kept, (lo, hi), per_dim, discarded, root_continuum, diagnostic, tie_tol)
    logger.debug(f"Shooting t={t}, x={x.tolist()}: {len(kept)} roots, k={mset.k}, discarded={discarded}")
    return mset


def value(spec: ProblemSpec, t: float, x, box=None, grid_per_dim: int = None,
          options: ShootingOptions = None):
    """
    u(t, x) and its MinimizerSet.

    Raises:
        ShootingError: no root found in the search box
    """
    mset = shoot_minimizers(spec, t, x, box, grid_per_dim, options)
    if mset.empty:
        raise ShootingError(f"⛔ value({t}, {np.atleast_1d(x).tolist()}): {mset.diagnostic}")
    return mset.u, mset


# -------------------------------
# Semiconcavity Probe
# -------------------------------
@dataclass
class SemiconcavityReport:
    constant: float
    samples: pd.DataFrame
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures


def semiconcavity_probe(spec: ProblemSpec, t_range, box, samples: int = 100, h_max: float = 0.05,
                        rng=None, options: ShootingOptions = None, noise: float = 1e-8) -> SemiconcavityReport:
    """
    Probe u(t,x+h) + u(t,x-h) - 2u(t,x) <= C_sc |h|^2 on a compact set.

    C_sc is fitted on the first half of the samples (twice the largest ratio)
    and checked on the second half; failures are the holdout samples above it.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    rows = []
    for _ in range(samples):
        t = float(rng.uniform(*t_range))
        x = rng.uniform(lo, hi)
        h = rng.uniform(-h_max, h_max, x.size)
        try:
            d2 = (value(spec, t, x + h, options=options)[0] + value(spec, t, x - h, options=options)[0]
                  - 2.0 * value(spec, t, x, options=options)[0])
        except ShootingError:
            d2 = float("nan")
        rows.append({"t": t, **{f"x{i + 1}": x[i] for i in range(x.size)},
                     "h_norm": float(np.linalg.norm(h)), "second_difference": d2,
                     "ratio": d2 / float(h @ h)})
    frame = pd.DataFrame(rows)
    half = max(1, samples // 2)
    calibration = frame["ratio"].iloc[:half].dropna()
    constant = 2.0 * max(float(calibration.max()) if len(calibration) else 0.0, 0.0)

    failures = []
    for i, row in frame.iloc[half:].iterrows():
        if not np.isfinite(row["second_difference"]) or row["second_difference"] > constant * row["h_norm"] ** 2 + noise:
            failures.append(int(i))
    if failures:
        logger.warning(f"⚠️ Semiconcavity probe: {len(failures)} holdout samples exceed C_sc={constant:.4g}")
    else:
        logger.info(f"✅ Semiconcavity probe passed with C_sc={constant:.4g}")
    return SemiconcavityReport(constant, frame, failures)
