"""
src/singular/tracing.py
-----------------------

Strict singular characteristics x' = v_bar(t, x) forward and backward in time.

Every right-hand-side evaluation re-evaluates the branch sheets at (t, x)
(warm-started Newton continuation or closed form) and re-minimizes the energy
on the tracked active face. After every accepted step the monitors below are
checked; the first one that trips ends the trace:

- conjugacy:           min over active branches of |det X_z| <= tol_conj
- rank_loss:           geometric independence margin <= tol_rank
- integration_failure: active branch values differ by more than tol_sing
- branch_crossing:     an inactive branch drops below the active value, a
                       sheet loses its root, or shooting finds extra minimizers
- face_boundary:       inactive support margin below half its initial value,
                       or a barycentric weight below tol_ri
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from src.bolza.shooting import ShootingOptions, shoot_minimizers
from src.characteristics.integrators import StepPolicy, rk4_step
from src.cut_locus.branches import BranchSheet, local_branches
from src.cut_locus.classify import Classification, ClassifyTolerances, Kind, classify_point
from src.errors import DomainError, GeometricDependenceError, PreconditionError, ShootingError
from src.problem.spec import ProblemSpec, hamiltonian_jet
from src.singular.energy import minimal_energy_element, minimax_candidates, nondegeneracy_check
from src.singular.faces import FaceSelection, exposed_face

logger = logging.getLogger(__name__)

STOP_REASONS = ("horizon", "face_boundary", "rank_loss", "branch_crossing", "conjugacy", "integration_failure")


@dataclass(frozen=True)
class TraceTolerances:
    """
    Attributes:
        tol_sing_rel (float): branch equality tolerance tol_sing_rel * (1 + |u|)
        tol_ri (float): relative interior margin of the barycentric weights
        tol_kkt (float): energy KKT tolerance
        tol_conj (float): |det X_z| conjugacy threshold
        tol_rank (float): geometric independence threshold
        face_tol (float): support tie tolerance for exposed faces
        tol_minimax (float): match tolerance for a supplied (q0, p0)
        step (float): RK4 step of the trace
        revalidate_every (int): steps between global shooting checks (0 disables)
        shooting (ShootingOptions): controls of the revalidation
    """

    tol_sing_rel: float = 1e-7
    tol_ri: float = 1e-6
    tol_kkt: float = 1e-9
    tol_conj: float = 1e-7
    tol_rank: float = 1e-8
    face_tol: float = 1e-9
    tol_minimax: float = 1e-8
    step: float = 1e-2
    revalidate_every: int = 25
    shooting: ShootingOptions = ShootingOptions()


@dataclass
class SingularSample:
    t: float
    x: np.ndarray
    mu: np.ndarray
    q_bar: float
    p_bar: np.ndarray
    v_bar: np.ndarray
    values: np.ndarray
    equality_residual: float
    value_margin: float
    support_margin: float
    interior_margin: float
    rank_margin: float
    det_Xz: np.ndarray
    kkt_residual: float

    def to_row(self) -> dict:
        row = {"t": self.t}
        row.update({f"x{i + 1}": v for i, v in enumerate(self.x)})
        row.update({f"lam{i + 1}": v for i, v in enumerate(self.mu[:-1])})
        row["q_bar"] = self.q_bar
        row.update({f"p_bar{i + 1}": v for i, v in enumerate(self.p_bar)})
        row.update({f"v_bar{i + 1}": v for i, v in enumerate(self.v_bar)})
        row.update({f"value{i + 1}": v for i, v in enumerate(self.values)})
        row.update({"equality_residual": self.equality_residual, "value_margin": self.value_margin,
                    "support_margin": self.support_margin, "interior_margin": self.interior_margin,
                    "rank_margin": self.rank_margin, "kkt_residual": self.kkt_residual})
        row.update({f"det_Xz{i + 1}": v for i, v in enumerate(self.det_Xz)})
        return row


@dataclass
class SingularCurve:
    samples: list
    direction: str
    stop_reason: str
    stop_time: float
    active: tuple
    hypotheses: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def points(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])

    @property
    def velocities(self) -> np.ndarray:
        return np.array([s.v_bar for s in self.samples])

    @property
    def max_equality_residual(self) -> float:
        return max(s.equality_residual for s in self.samples)

    def position(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, col) for col in self.points.T])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([s.to_row() for s in self.samples])

    def header(self) -> dict:
        return {"direction": self.direction, "stop_reason": self.stop_reason, "stop_time": self.stop_time,
                "active": list(self.active), "samples": len(self.samples),
                "t_range": [float(self.times[0]), float(self.times[-1])],
                "max_equality_residual": self.max_equality_residual,
                "hypotheses": self.hypotheses, "diagnostics": self.diagnostics}


class _Stop(Exception):
    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


# -------------------------------
# Tracer
# -------------------------------
class SingularTracer:
    """
    One strict singular characteristic on a fixed active face.

    Args:
        spec (ProblemSpec): problem (used for H and for revalidation)
        sheets (list): BranchSheet / AnalyticSheet objects, active and inactive
        active (tuple): indices of the tracked face
        sign (int): +1 forward, -1 backward
        sigma0 (float): initial inactive support margin
    """

    def __init__(self, spec: ProblemSpec, sheets, active, sign: int, sigma0: float,
                 tolerances: TraceTolerances = None):
        self.spec = spec
        self.sheets = [s.copy() for s in sheets]
        self.active = tuple(active)
        self.sign = sign
        self.sigma0 = sigma0
        self.tol = tolerances or TraceTolerances()

    def _evaluate(self, t, x):
        try:
            branches = [s.evaluate(t, x) for s in self.sheets]
        except ShootingError as e:
            logger.warning(f"⚠️ {e}")
            raise _Stop("branch_crossing")
        vertices = np.array([b.gradient for b in branches])
        face = FaceSelection(vertices, self.active)
        try:
            em = minimal_energy_element(self.spec, t, x, face, branches[self.active[-1]].value,
                                        self.tol.tol_kkt, self.tol.tol_ri, self.tol.tol_rank)
        except GeometricDependenceError:
            raise _Stop("rank_loss")
        return branches, face, em

    def velocity(self, t, x):
        try:
            return self._evaluate(t, x)[2].v_bar
        except DomainError:
            raise _Stop("integration_failure")

    def sample(self, t, x):
        """SingularSample at (t, x) and the first monitor that trips (None if none)."""
        branches, face, em = self._evaluate(t, x)
        values = np.array([b.value for b in branches])
        dets = np.array([b.det_Xz for b in branches])
        ref = values[self.active[-1]]
        tol_sing = self.tol.tol_sing_rel * (1.0 + abs(ref))
        inactive = list(face.inactive)
        support = face.vertices @ np.concatenate([[1.0], em.v_bar])
        active_support = support[list(self.active)].min()
        value_margin = float(np.min(values[inactive] - ref)) if inactive else float("inf")
        support_margin = (float(np.min(self.sign * (support[inactive] - active_support)))
                          if inactive else float("inf"))
        sample = SingularSample(float(t), np.array(x, dtype=float), em.mu, em.q_bar, em.p_bar, em.v_bar, values,
                                float(np.max(np.abs(values[list(self.active)] - ref))), value_margin,
                                support_margin, em.interior_margin, face.rank_margin(), dets, em.kkt_residual)

        reason = None
        if np.min(np.abs(dets[list(self.active)])) <= self.tol.tol_conj:
            reason = "conjugacy"
        elif sample.rank_margin <= self.tol.tol_rank:
            reason = "rank_loss"
        elif sample.equality_residual > tol_sing:
            reason = "integration_failure"
        elif value_margin < -tol_sing:
            reason = "branch_crossing"
        elif np.isfinite(self.sigma0) and support_margin < 0.5 * self.sigma0:
            reason = "face_boundary"
        elif face.k_prime > 1 and em.interior_margin < self.tol.tol_ri:
            reason = "face_boundary"
        return sample, reason

    def _revalidate(self, t, x) -> bool:
        mset = shoot_minimizers(self.spec, t, x, options=self.tol.shooting)
        if mset.k > len(self.sheets):
            logger.warning(f"⚠️ Revalidation at t={t:.6g}: {mset.k} minimizers, {len(self.sheets)} tracked")
            return False
        return True

    def run(self, t0: float, x0, t_end: float, first: SingularSample):
        """Integrate from (t0, x0) to t_end; returns (samples, stop_reason, stop_time)."""
        grid = StepPolicy(step=self.tol.step).grid(t0, t_end)
        samples = [first]
        x = np.array(x0, dtype=float)
        for j in range(grid.size - 1):
            t, h = grid[j], grid[j + 1] - grid[j]
            try:
                x_new = rk4_step(self.velocity, t, x, h)
                if not np.all(np.isfinite(x_new)):
                    raise _Stop("integration_failure")
                sample, reason = self.sample(grid[j + 1], x_new)
                if reason is None and self.tol.revalidate_every and (j + 1) % self.tol.revalidate_every == 0:
                    if not self._revalidate(grid[j + 1], x_new):
                        reason = "branch_crossing"
            except DomainError:
                reason = "integration_failure"
            except _Stop as stop:
                reason = stop.reason
            if reason is not None:
                logger.info(f"✅ Trace stopped at t={grid[j + 1]:.6g}: {reason}")
                return samples, reason, float(grid[j + 1])
            samples.append(sample)
            x = x_new
        return samples, "horizon", float(grid[-1])


# -------------------------------
# Preconditions
# -------------------------------
def _branches_at(spec, t0, x0, sheets, tol, classification, k_required=None):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if classification is not None and classification.kind is not Kind.IRREGULAR_ONLY:
        raise PreconditionError(f"⛔ ({t0}, {x0.tolist()}) is {classification.kind.value}, need IrregularOnly",
                                hypothesis="(t0, x0) irregular and not conjugate")
    if len(sheets) < 2:
        raise PreconditionError("⛔ a singular characteristic needs at least two branches", hypothesis="k >= 2")
    if k_required is not None and len(sheets) != k_required:
        raise PreconditionError(f"⛔ need exactly {k_required} branches, got {len(sheets)}",
                                hypothesis=f"k = {k_required}")
    branches = [s.copy().evaluate(t0, x0) for s in sheets]
    values = np.array([b.value for b in branches])
    if np.ptp(values) > tol.tol_sing_rel * (1.0 + abs(values[-1])):
        raise PreconditionError(f"⛔ branch values differ by {np.ptp(values):.3e} at ({t0}, {x0.tolist()})",
                                hypothesis="(t0, x0) on the singular set")
    if min(abs(b.det_Xz) for b in branches) <= tol.tol_conj:
        raise PreconditionError("⛔ a branch is conjugate at the start point", hypothesis="no conjugate branch")
    return x0, branches


def _forward_face(spec, t0, x0, branches, tol):
    vertices = np.array([b.gradient for b in branches])
    whole = minimal_energy_element(spec, t0, x0, FaceSelection.whole(vertices), branches[-1].value,
                                   tol.tol_kkt, tol.tol_ri, tol.tol_rank, require_independent=False)
    # supports of the whole-set minimizer tie only up to its KKT residual
    face_tol = max(tol.face_tol, 10.0 * whole.kkt_residual)
    face = exposed_face(vertices, np.concatenate([[1.0], whole.v_bar]), face_tol)
    try:
        em = minimal_energy_element(spec, t0, x0, face, branches[face.active[-1]].value,
                                    tol.tol_kkt, tol.tol_ri, tol.tol_rank)
    except GeometricDependenceError as e:
        raise PreconditionError(str(e), hypothesis="geometric independence of the face gradients")
    face_tol = max(face_tol, 10.0 * em.kkt_residual)
    report = nondegeneracy_check(face, em, tol_rank=tol.tol_rank, tol_ri=tol.tol_ri, face_tol=face_tol)
    if not report.passed:
        raise PreconditionError(f"⛔ forward trace refused: {report.failed_hypothesis()} fails",
                                hypothesis=report.failed_hypothesis())
    return face, em, report


def _start_sample(tracer, t0, x0):
    try:
        first, reason = tracer.sample(t0, x0)
    except _Stop as stop:
        reason = stop.reason
    if reason is not None:
        raise PreconditionError(f"⛔ monitor {reason} trips at the start point", hypothesis=reason)
    return first


def trace_forward(spec: ProblemSpec, t0: float, x0, sheets, horizon: float, tolerances: TraceTolerances = None,
                  classification: Classification = None) -> SingularCurve:
    """
    Forward strict singular characteristic from an irregular, non-degenerate point.

    The tracked face is the face of D#u(t0,x0) exposed by (1, v_bar), where
    v_bar comes from the minimal-energy element of the whole superdifferential.

    Args:
        spec (ProblemSpec): problem
        t0, x0: start point on the singular set
        sheets (list): branch sheets of every minimizer at (t0, x0)
        horizon (float): trace length
        tolerances (TraceTolerances): monitors and step
        classification (Classification): optional classify_point result to check

    Raises:
        PreconditionError: a hypothesis fails; the message names it
    """
    tol = tolerances or TraceTolerances()
    if horizon <= 0:
        raise PreconditionError(f"⛔ horizon must be positive, got {horizon}", hypothesis="horizon > 0")
    x0, branches = _branches_at(spec, t0, x0, sheets, tol, classification)
    face, em, report = _forward_face(spec, t0, x0, branches, tol)

    tracer = SingularTracer(spec, sheets, face.active, +1, report.exposure_slack, tol)
    first = _start_sample(tracer, t0, x0)
    samples, stop, stop_time = tracer.run(t0, x0, t0 + horizon, first)
    return SingularCurve(samples, "forward", stop, stop_time, face.active, report.to_dict())


def trace_backward(spec: ProblemSpec, t0: float, x0, sheets, horizon: float, qp0=None,
                   tolerances: TraceTolerances = None, classification: Classification = None) -> SingularCurve:
    """
    Backward strict singular characteristic ending at (t0, x0).

    (q0, p0) must be a minimax element of D#u(t0,x0); when it is not supplied
    the minimax candidates are enumerated over branch subsets. The returned
    samples are in increasing time.

    Raises:
        PreconditionError: (q0, p0) is not minimax, or no minimax candidate exists
    """
    tol = tolerances or TraceTolerances()
    if not 0 < horizon < t0:
        raise PreconditionError(f"⛔ backward horizon must lie in (0, t0), got {horizon}",
                                hypothesis="0 < horizon < t0")
    x0, branches = _branches_at(spec, t0, x0, sheets, tol, classification)
    candidates = minimax_candidates(spec, t0, x0, branches, tol.tol_kkt, tol.tol_ri, tol.tol_rank, tol.face_tol)
    if qp0 is not None:
        qp0 = np.asarray(qp0, dtype=float)
        scale = tol.tol_minimax * (1.0 + float(np.max(np.abs(qp0))))
        candidates = [c for c in candidates if np.max(np.abs(c.minimum.gradient - qp0)) <= scale]
        if not candidates:
            raise PreconditionError(f"⛔ ({qp0.tolist()}) is not a minimax element at ({t0}, {x0.tolist()})",
                                    hypothesis="(q0, p0) minimax")
    if not candidates:
        raise PreconditionError("⛔ no minimax element at the start point", hypothesis="(q0, p0) minimax")
    if len(candidates) > 1:
        logger.warning(f"⚠️ {len(candidates)} minimax candidates; tracing the largest face")
    chosen = max(candidates, key=lambda c: c.face.k_prime)

    p0 = chosen.minimum.p_bar if qp0 is None else qp0[1:]
    h_p0 = hamiltonian_jet(spec, t0, x0, p0, chosen.minimum.u_ref, order=1).p
    tracer = SingularTracer(spec, sheets, chosen.face.active, -1, chosen.report.backward_slack, tol)
    first = _start_sample(tracer, t0, x0)
    samples, stop, stop_time = tracer.run(t0, x0, t0 - horizon, first)
    gap = float(np.max(np.abs(first.v_bar - h_p0)))
    return SingularCurve(samples[::-1], "backward", stop, stop_time, chosen.face.active, chosen.report.to_dict(),
                         {"left_derivative_gap": gap, "minimax_candidates": len(candidates)})


def trace_two_branch(spec: ProblemSpec, t0: float, x0, sheets, horizon_fwd: float, horizon_bwd: float,
                     tolerances: TraceTolerances = None, classification: Classification = None,
                     interface=None) -> SingularCurve:
    """
    Bidirectional trace through a k = 2 singular point.

    The joined curve carries the residual |v1 - v2| along the trace and, when
    an analytic interface t -> x(t) is supplied, the sup distance to it.

    Raises:
        PreconditionError: k != 2
    """
    if classification is not None and classification.k != 2:
        raise PreconditionError(f"⛔ two-branch trace needs k = 2, got k = {classification.k}",
                                hypothesis="k = 2")
    tol = tolerances or TraceTolerances()
    _branches_at(spec, t0, x0, sheets, tol, classification, k_required=2)
    forward = trace_forward(spec, t0, x0, sheets, horizon_fwd, tol, classification)
    samples = list(forward.samples)
    diagnostics = {"forward_stop": forward.stop_reason}
    if horizon_bwd > 0:
        backward = trace_backward(spec, t0, x0, sheets, horizon_bwd, None, tol, classification)
        samples = backward.samples[:-1] + samples
        diagnostics.update({"backward_stop": backward.stop_reason, "backward_stop_time": backward.stop_time,
                            "left_derivative_gap": backward.diagnostics["left_derivative_gap"]})
    curve = SingularCurve(samples, "both", forward.stop_reason, forward.stop_time, forward.active,
                          forward.hypotheses, diagnostics)
    curve.diagnostics["interface_residual"] = curve.max_equality_residual
    if interface is not None:
        distance = [float(np.max(np.abs(s.x - np.atleast_1d(interface(s.t))))) for s in samples]
        curve.diagnostics["interface_distance"] = max(distance)
    logger.info(f"✅ Two-branch trace on [{curve.times[0]:.4g}, {curve.times[-1]:.4g}], "
                f"|v1 - v2| <= {curve.max_equality_residual:.2e}")
    return curve


# -------------------------------
# Numerical Sheets
# -------------------------------
def numeric_sheets(spec: ProblemSpec, t: float, x, tolerances: ClassifyTolerances = None,
                   options: ShootingOptions = None):
    """
    Classification at (t, x) and one BranchSheet per accepted minimizing branch.

    Returns:
        tuple: (Classification, list of BranchSheet)
    """
    tolerances = tolerances or ClassifyTolerances()
    classification = classify_point(spec, t, x, tolerances)
    branches = local_branches(spec, t, x, classification, options)
    sheets = BranchSheet.from_branches(spec, branches, options or tolerances.shooting)
    return classification, sheets


def retrace_gap(spec: ProblemSpec, curve: SingularCurve, sheets, tolerances: TraceTolerances = None) -> Optional[float]:
    """Retrace a forward curve backward from its endpoint; distance to its start point."""
    if curve.direction != "forward" or len(curve.samples) < 2:
        return None
    start, end = curve.samples[0], curve.samples[-1]
    back = trace_backward(spec, end.t, end.x, sheets, end.t - start.t, None, tolerances)
    return float(np.max(np.abs(back.samples[0].x - start.x)))
