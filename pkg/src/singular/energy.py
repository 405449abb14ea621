"""
src/singular/energy.py
----------------------

Minimal-energy element of a face of D#u(t,x).

With barycentric weights mu over the active gradients (q_i, p_i),

    E(mu) = sum_i mu_i q_i + H(t, x, sum_i mu_i p_i, u_ref)

is convex on the simplex; dE/dmu_i = q_i + H_p(p_bar).p_i =: c_i. The
minimizer equalizes c_i on its support and has c_j >= c on the rest. The
velocity of the strict singular characteristic is v_bar = H_p(t, x, p_bar, u_ref).
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from src.errors import PreconditionError
from src.problem.spec import ProblemSpec, hamiltonian_jet
from src.singular.faces import FaceSelection, exposed_face, independence_margin

logger = logging.getLogger(__name__)

MAX_BRANCHES = 8


@dataclass
class EnergyMinimum:
    """
    Attributes:
        mu (np.ndarray): barycentric weights over the active vertices (sum 1)
        q_bar, p_bar: the minimal-energy element (q_bar, p_bar) = sum mu_i Dv_i
        v_bar (np.ndarray): H_p(t, x, p_bar, u_ref)
        energy (float): E at the minimum
        interior_margin (float): min_i mu_i (inf for a singleton face)
        kkt_residual (float): stationarity and dual feasibility defect
        curvature (float): smallest eigenvalue of D^2_lam E (inf for a singleton face)
        method (str): newton, active_set, bounded_scalar or slsqp
    """

    face: FaceSelection
    mu: np.ndarray
    q_bar: float
    p_bar: np.ndarray
    v_bar: np.ndarray
    energy: float
    u_ref: float
    interior_margin: float
    kkt_residual: float
    curvature: float
    method: str
    tol_ri: float = 1e-6

    @property
    def lam(self) -> np.ndarray:
        """Simplex coordinates: weights of the first k'-1 vertices."""
        return self.mu[:-1]

    @property
    def interior(self) -> bool:
        return self.interior_margin >= self.tol_ri

    @property
    def gradient(self) -> np.ndarray:
        return np.concatenate([[self.q_bar], self.p_bar])


def energy(spec: ProblemSpec, t: float, x, vertices, mu, u_ref: float) -> float:
    """E(mu) for barycentric weights mu over the rows (q_i, p_i) of vertices."""
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    mu = np.asarray(mu, dtype=float)
    p_bar = mu @ vertices[:, 1:]
    return float(mu @ vertices[:, 0]) + hamiltonian_jet(spec, t, x, p_bar, u_ref, order=0).value


def _supports(spec, t, x, vertices, mu, u_ref):
    p_bar = mu @ vertices[:, 1:]
    H = hamiltonian_jet(spec, t, x, p_bar, u_ref, order=2)
    return vertices[:, 0] + vertices[:, 1:] @ H.p, H


def _kkt(c, mu):
    nu = float(mu @ c)
    on = mu > 0
    stationarity = float(np.max(np.abs(c[on] - nu))) if np.any(on) else 0.0
    dual = float(np.max(np.maximum(nu - c, 0.0)))
    return max(stationarity, dual)


def _newton_on_support(spec, t, x, vertices, u_ref, support, tol_kkt, max_iter=50):
    """Newton in the simplex coordinates of one support; mu may leave the simplex."""
    k = vertices.shape[0]
    S = list(support)
    mu = np.zeros(k)
    mu[S] = 1.0 / len(S)
    if len(S) == 1:
        return mu, True
    B = vertices[S[:-1], 1:] - vertices[S[-1], 1:]
    dq = vertices[S[:-1], 0] - vertices[S[-1], 0]

    def shifted(step):
        out = mu.copy()
        out[S[:-1]] += step
        out[S[-1]] -= step.sum()
        return out

    for it in range(max_iter):
        H = hamiltonian_jet(spec, t, x, mu @ vertices[:, 1:], u_ref, order=2)
        g = dq + B @ H.p
        if float(np.max(np.abs(g))) <= tol_kkt:
            logger.debug(f"Energy Newton on support {S} converged in {it} iterations")
            return mu, True
        G = B @ H.pp @ B.T
        d = np.linalg.lstsq(G, -g, rcond=1e-12)[0]
        E0 = energy(spec, t, x, vertices, mu, u_ref)
        lam = 1.0
        for _ in range(30):
            candidate = shifted(lam * d)
            if energy(spec, t, x, vertices, candidate, u_ref) <= E0 + 1e-15 * (1.0 + abs(E0)):
                break
            lam *= 0.5
        mu = candidate
        if float(np.max(np.abs(lam * d))) < 1e-15:
            break
    H = hamiltonian_jet(spec, t, x, mu @ vertices[:, 1:], u_ref, order=1)
    return mu, float(np.max(np.abs(dq + B @ H.p))) <= tol_kkt


def _fallback(spec, t, x, vertices, u_ref):
    k = vertices.shape[0]
    if k == 2:
        res = minimize_scalar(lambda s: energy(spec, t, x, vertices, [s, 1.0 - s], u_ref),
                              bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-14})
        return np.array([res.x, 1.0 - res.x]), "bounded_scalar"
    res = minimize(lambda m: energy(spec, t, x, vertices, m, u_ref), np.full(k, 1.0 / k), method="SLSQP",
                   bounds=[(0.0, 1.0)] * k, constraints=[{"type": "eq", "fun": lambda m: m.sum() - 1.0}],
                   options={"ftol": 1e-15, "maxiter": 500})
    return np.asarray(res.x), "slsqp"


def minimal_energy_element(spec: ProblemSpec, t: float, x, face: FaceSelection, u_ref: float,
                           tol_kkt: float = 1e-9, tol_ri: float = 1e-6, tol_rank: float = 1e-8,
                           require_independent: bool = True) -> EnergyMinimum:
    """
    Unique minimizer of E over the simplex spanned by the active vertices of face.

    Newton on the full support first; if its solution leaves the simplex or
    fails KKT, every smaller support is solved and the KKT-feasible one with
    least energy is kept. A bounded scalar (k'=2) or SLSQP search is the last
    resort.

    Args:
        spec (ProblemSpec): problem
        t, x: point
        face (FaceSelection): face of D#u(t,x)
        u_ref (float): v_k'(t, x), the value of the reference branch
        tol_kkt (float): KKT tolerance, scaled by 1 + max|c_i|
        tol_ri (float): relative interior margin
        tol_rank (float): geometric independence threshold

    Raises:
        GeometricDependenceError: face gradients are affinely dependent
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if require_independent:
        face.require_independent(tol_rank)
    vertices = face.active_vertices
    k = vertices.shape[0]

    mu, method = np.ones(1), "newton"
    if k > 1:
        scale = 1.0 + float(np.max(np.abs(vertices)))
        mu, converged = _newton_on_support(spec, t, x, vertices, u_ref, range(k), tol_kkt * scale)
        if not (converged and np.all(mu >= -1e-14)):
            mu, method = None, "active_set"
            best = float("inf")
            for size in range(k - 1, 0, -1):
                for support in itertools.combinations(range(k), size):
                    cand, ok = _newton_on_support(spec, t, x, vertices, u_ref, support, tol_kkt * scale)
                    if not ok or np.any(cand < -1e-14):
                        continue
                    cand = np.clip(cand, 0.0, None)
                    cand /= cand.sum()
                    c, _ = _supports(spec, t, x, vertices, cand, u_ref)
                    e = energy(spec, t, x, vertices, cand, u_ref)
                    if _kkt(c, cand) <= 10.0 * tol_kkt * (1.0 + float(np.max(np.abs(c)))) and e < best:
                        mu, best = cand, e
            if mu is None:
                mu, method = _fallback(spec, t, x, vertices, u_ref)
                logger.warning(f"⚠️ Energy minimization at t={t} fell back to {method}")
        mu = np.clip(mu, 0.0, None)
        mu /= mu.sum()

    c, H = _supports(spec, t, x, vertices, mu, u_ref)
    p_bar = mu @ vertices[:, 1:]
    if k > 1:
        B = vertices[:-1, 1:] - vertices[-1, 1:]
        curvature = float(np.linalg.eigvalsh(B @ H.pp @ B.T)[0])
        interior_margin = float(mu.min())
    else:
        curvature, interior_margin = float("inf"), float("inf")
    return EnergyMinimum(face, mu, float(mu @ vertices[:, 0]), p_bar, np.atleast_1d(H.p).copy(),
                         float(mu @ vertices[:, 0]) + H.value, float(u_ref), interior_margin, _kkt(c, mu),
                         curvature, method, tol_ri)


# -------------------------------
# Non-degeneracy
# -------------------------------
@dataclass
class NondegeneracyReport:
    geometrically_independent: bool
    rank_margin: float
    interior: bool
    interior_margin: float
    exposed_in_velocity_direction: bool
    exposure_slack: float
    minimax: bool
    backward_slack: float

    @property
    def passed(self) -> bool:
        return self.geometrically_independent and self.interior and self.exposed_in_velocity_direction

    def failed_hypothesis(self) -> str:
        if not self.geometrically_independent:
            return "geometric independence of the face gradients"
        if not self.interior:
            return "minimal-energy element in the relative interior of the face"
        if not self.exposed_in_velocity_direction:
            return "face exposed by (1, v_bar)"
        return ""

    def to_dict(self) -> dict:
        return {k: (v if not isinstance(v, float) or np.isfinite(v) else None) for k, v in self.__dict__.items()}


def nondegeneracy_check(face: FaceSelection, em: EnergyMinimum = None, vertices=None, tol_rank: float = 1e-8,
                        tol_ri: float = 1e-6, face_tol: float = 1e-9) -> NondegeneracyReport:
    """
    Report-only check of the hypotheses of the local propagation results.

    - geometric independence: rank of the gradient differences is k'-1
    - interior: every barycentric weight of the minimal-energy element >= tol_ri
    - exposure: the face is exposed by (1, v_bar) among all vertices
    - minimax: k' >= 2, interior, and the face is exposed by -(1, v_bar)

    Without an energy minimum only independence is evaluated.
    """
    vertices = face.vertices if vertices is None else np.atleast_2d(np.asarray(vertices, dtype=float))
    margin = independence_margin(face.active_vertices)
    independent = margin > tol_rank
    if em is None:
        return NondegeneracyReport(independent, margin, False, float("nan"), False, float("nan"), False,
                                   float("nan"))

    interior = em.interior_margin >= tol_ri
    theta = np.concatenate([[1.0], em.v_bar])
    active = {tuple(v) for v in face.active_vertices}
    forward = exposed_face(vertices, theta, face_tol)
    backward = exposed_face(vertices, -theta, face_tol)
    exposed = {tuple(v) for v in forward.active_vertices} == active
    minimax = (independent and interior and face.k_prime >= 2
               and {tuple(v) for v in backward.active_vertices} == active)
    return NondegeneracyReport(bool(independent), margin, bool(interior), em.interior_margin, bool(exposed),
                               forward.slack, bool(minimax), backward.slack)


# -------------------------------
# Minimax Candidates
# -------------------------------
@dataclass
class MinimaxCandidate:
    face: FaceSelection
    minimum: EnergyMinimum
    report: NondegeneracyReport


def minimax_candidates(spec: ProblemSpec, t: float, x, branches, tol_kkt: float = 1e-9, tol_ri: float = 1e-6,
                       tol_rank: float = 1e-8, face_tol: float = 1e-9) -> list:
    """
    Minimal-energy elements of every face spanned by >= 2 branch gradients that
    are minimax at (t, x).

    Raises:
        PreconditionError: more than MAX_BRANCHES branches
    """
    k = len(branches)
    if k > MAX_BRANCHES:
        raise PreconditionError(f"⛔ minimax enumeration supports k <= {MAX_BRANCHES}, got {k}",
                                hypothesis=f"k <= {MAX_BRANCHES}")
    vertices = np.array([b.gradient for b in branches])
    found = []
    for size in range(2, k + 1):
        for subset in itertools.combinations(range(k), size):
            face = FaceSelection(vertices, subset)
            if face.rank_margin() <= tol_rank:
                continue
            em = minimal_energy_element(spec, t, x, face, branches[subset[-1]].value, tol_kkt, tol_ri, tol_rank)
            report = nondegeneracy_check(face, em, tol_rank=tol_rank, tol_ri=tol_ri,
                                         face_tol=max(face_tol, 10.0 * em.kkt_residual))
            if report.minimax:
                found.append(MinimaxCandidate(face, em, report))
    logger.debug(f"Minimax enumeration at t={t}: {len(found)} candidates out of {2 ** k - k - 1} faces")
    return found
