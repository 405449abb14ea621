"""
src/cut_locus/classify.py
-------------------------

Point classification (Regular / irregular / conjugate) and conjugate times.

Rules on the minimizing entries of the shooting result:
- Regular:               k = 1 and |det X_z| > tol_conj
- IrregularOnly:         k >= 2 and every |det X_z| > tol_conj
- ConjugateOnly:         k = 1 and |det X_z| <= tol_conj
- IrregularAndConjugate: k >= 2 and some |det X_z| <= tol_conj
- Unknown:               shooting found no root

A root continuum (every seed is a conjugate root) is reported as ConjugateOnly.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.optimize import brentq, minimize_scalar
from tqdm import tqdm

from src.bolza.shooting import MinimizerSet, ShootingOptions, shoot_minimizers
from src.characteristics.flow import integrate_variational, propagate, split_joint
from src.characteristics.integrators import StepPolicy
from src.errors import PreconditionError
from src.problem.spec import ProblemSpec

logger = logging.getLogger(__name__)


class Kind(str, Enum):
    REGULAR = "Regular"
    IRREGULAR_ONLY = "IrregularOnly"
    CONJUGATE_ONLY = "ConjugateOnly"
    IRREGULAR_AND_CONJUGATE = "IrregularAndConjugate"
    UNKNOWN = "Unknown"

    @property
    def singular(self) -> bool:
        return self in (Kind.IRREGULAR_ONLY, Kind.CONJUGATE_ONLY, Kind.IRREGULAR_AND_CONJUGATE)


@dataclass(frozen=True)
class ClassifyTolerances:
    tol_conj: float = 1e-7
    shooting: ShootingOptions = ShootingOptions()


@dataclass
class Classification:
    t: float
    x: np.ndarray
    kind: Kind
    k: int
    det_Xz: list
    margin: float
    tolerances: ClassifyTolerances
    minimizers: Optional[MinimizerSet] = None
    diagnostic: str = ""

    def to_row(self) -> dict:
        row = {"t": self.t, **{f"x{i + 1}": v for i, v in enumerate(self.x)}}
        row.update({
            "kind": self.kind.value,
            "k": self.k,
            "min_abs_det": min((abs(d) for d in self.det_Xz), default=float("nan")),
            "margin": self.margin,
        })
        return row


def classify_point(spec: ProblemSpec, t: float, x, tolerances: ClassifyTolerances = None,
                   box=None) -> Classification:
    """
    Classify (t, x) from its minimizer set.

    margin is min |det X_z| - tol_conj over the minimizing entries, so points
    near the conjugacy threshold are visible without forcing the decision.
    """
    tolerances = tolerances or ClassifyTolerances()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mset = shoot_minimizers(spec, t, x, box, options=tolerances.shooting)
    if mset.empty:
        return Classification(t, x, Kind.UNKNOWN, 0, [], float("nan"), tolerances, mset, mset.diagnostic)

    dets = [e.det_Xz for e in mset.minimizing]
    conjugate = [abs(d) <= tolerances.tol_conj for d in dets]
    k = mset.k
    margin = min(abs(d) for d in dets) - tolerances.tol_conj
    diagnostic = ""
    if mset.root_continuum:
        kind = Kind.CONJUGATE_ONLY
        diagnostic = "root continuum: every seed reaches x and all are conjugate"
    elif k == 1:
        kind = Kind.CONJUGATE_ONLY if conjugate[0] else Kind.REGULAR
    elif any(conjugate):
        kind = Kind.IRREGULAR_AND_CONJUGATE
    else:
        kind = Kind.IRREGULAR_ONLY
    if abs(margin) <= 10 * tolerances.tol_conj:
        logger.warning(f"⚠️ ({t}, {x.tolist()}) is within 10*tol_conj of the conjugacy threshold")
    logger.debug(f"Classified ({t}, {x.tolist()}) as {kind.value} with k={k}")
    return Classification(t, x, kind, k, dets, margin, tolerances, mset, diagnostic)


def classify_map(spec: ProblemSpec, times, points, tolerances: ClassifyTolerances = None,
                 n_jobs: int = 1, progress: bool = True) -> pd.DataFrame:
    """
    Classify every (t, x) in times x points.

    Returns:
        pd.DataFrame: columns t, x1.., kind, k, min_abs_det, margin (grid order)
    """
    tolerances = tolerances or ClassifyTolerances()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != spec.n:
        points = points.reshape(-1, spec.n)
    jobs = [(float(t), p) for t in times for p in points]
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_classify_row)(spec, t, p, tolerances)
        for t, p in tqdm(jobs, desc="classify-map", disable=not progress)
    )
    frame = pd.DataFrame(rows)
    logger.info(f"✅ Classified {len(frame)} points: {frame['kind'].value_counts().to_dict()}")
    return frame


def _classify_row(spec, t, x, tolerances):
    return classify_point(spec, t, x, tolerances).to_row()


# -------------------------------
# Conjugate Times
# -------------------------------
@dataclass
class ConjugateTime:
    seed: np.ndarray
    t_star: float
    theta: np.ndarray
    det_Xz: float
    Uz_theta: float
    Pz_theta: float
    detector: str
    state: np.ndarray = field(repr=False, default=None)

    @property
    def verified(self) -> bool:
        return self.Uz_theta <= 1e-6 and self.Pz_theta > 1e-8


def _kernel_direction(A: np.ndarray) -> np.ndarray:
    _, _, Vt = np.linalg.svd(A)
    theta = Vt[-1]
    lead = np.flatnonzero(np.abs(theta) > 1e-12)
    if lead.size and theta[lead[0]] < 0:
        theta = -theta
    return theta


def conjugate_time(spec: ProblemSpec, z, t_max: float, control: StepPolicy = None,
                   tol_time: float = 1e-10, tol_conj: float = 1e-7) -> Optional[ConjugateTime]:
    """
    First t* in (0, t_max] with det X_z(t*; z) = 0, or None.

    Sign changes of det X_z are bracketed on the integration grid and solved
    with brentq; dips of |det X_z| below tol_conj without a sign change are
    located with a bounded scalar minimization.
    """
    if t_max <= 0:
        raise PreconditionError(f"⛔ t_max must be positive, got {t_max}", hypothesis="t_max > 0")
    n = spec.n
    var = integrate_variational(spec, z, t_max, control)
    s = var.s
    dets = var.det_Xz()
    states = np.hstack([var.char.X, var.char.P, var.char.U[:, None],
                        var.Xz.reshape(s.size, -1), var.Pz.reshape(s.size, -1), var.Uz])

    def det_at(j, tau):
        if tau == s[j]:
            return float(dets[j])
        _, Y = propagate(spec, s[j], states[j], tau, control, variational=True)
        return float(np.linalg.det(split_joint(Y[-1], n)[3]))

    t_star, detector = None, None
    for j in range(1, s.size):
        if dets[j] == 0.0:
            t_star, detector = float(s[j]), "sign_change"
            break
        if dets[j - 1] * dets[j] < 0:
            t_star = brentq(lambda tau: det_at(j - 1, tau), s[j - 1], s[j], xtol=tol_time)
            detector = "sign_change"
            break
        is_dip = abs(dets[j]) <= tol_conj and (j == s.size - 1 or abs(dets[j]) <= abs(dets[j + 1]))
        if is_dip:
            hi = s[min(j + 1, s.size - 1)]
            res = minimize_scalar(lambda tau: abs(det_at(j - 1, tau)), bounds=(s[j - 1], hi),
                                  method="bounded", options={"xatol": tol_time})
            t_star, detector = float(res.x), "magnitude_dip"
            break

    if t_star is None:
        logger.debug(f"No conjugate time along z={np.atleast_1d(z).tolist()} up to {t_max}")
        return None

    j = int(np.searchsorted(s, t_star, side="right")) - 1
    j = min(max(j, 0), s.size - 1)
    Y = states[j] if t_star == s[j] else propagate(spec, s[j], states[j], t_star, control, variational=True)[1][-1]
    _, _, _, Xz, Pz, Uz = split_joint(Y, n)
    theta = _kernel_direction(Xz)
    result = ConjugateTime(np.atleast_1d(np.asarray(z, dtype=float)), float(t_star), theta,
                           float(np.linalg.det(Xz)), float(abs(Uz @ theta)),
                           float(np.linalg.norm(Pz @ theta)), detector, Y)
    if not result.verified:
        logger.warning(f"⚠️ Conjugate time {t_star:.10g} failed the kernel checks: "
                       f"|U_z theta|={result.Uz_theta:.2e}, |P_z theta|={result.Pz_theta:.2e}")
    logger.info(f"✅ Conjugate time t*={t_star:.10g} along z={result.seed.tolist()} ({detector})")
    return result
