"""
src/cut_locus/second_variation.py
---------------------------------

Accessory second variation J*(alpha) along a characteristic, and the broken
witness alpha = X_z theta on [0, s_bar], 0 on [s_bar, t], built at a conjugate
time s_bar.

    J*(alpha) = w(0) alpha(0)^T D^2u0 alpha(0)
              + int_0^t w(tau) { alpha^T A alpha + 2 alpha^T B alpha' + alpha'^T L_vv alpha' } dtau

    w(tau) = exp(int_tau^t L_u),  A = L_xx + 2 L_xu L_v^T + L_uu L_v L_v^T,  B = L_xv + L_v L_uv^T

A corner of alpha is a repeated grid node: the first copy holds the left
derivative, the second the right derivative.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.characteristics.flow import integrate_variational
from src.characteristics.integrators import StepPolicy
from src.characteristics.trajectories import CharTrajectory
from src.errors import PreconditionError
from src.problem.spec import ProblemSpec, hamiltonian_jet, lagrangian_jet

logger = logging.getLogger(__name__)


@dataclass
class Perturbation:
    s: np.ndarray
    alpha: np.ndarray
    alpha_dot: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(self.s.size, -1)
        self.alpha_dot = np.asarray(self.alpha_dot, dtype=float).reshape(self.alpha.shape)
        if np.any(np.diff(self.s) < 0):
            raise ValueError("⛔ perturbation grid must be non-decreasing")

    @classmethod
    def from_function(cls, s, alpha, alpha_dot) -> "Perturbation":
        s = np.asarray(s, dtype=float)
        return cls(s, np.array([np.atleast_1d(alpha(x)) for x in s]),
                   np.array([np.atleast_1d(alpha_dot(x)) for x in s]))


@dataclass
class SecondVariationReport:
    seed: np.ndarray
    value: float
    error_estimate: float
    initial_term: float
    integral: float
    tol_J: float

    @property
    def nonnegative(self) -> bool:
        return self.value >= -self.tol_J

    def to_dict(self) -> dict:
        return {"seed": self.seed.tolist(), "J_star": self.value, "error_estimate": self.error_estimate,
                "initial_term": self.initial_term, "integral": self.integral,
                "nonnegative": self.nonnegative}


def _trapezoid(s, f, index):
    return float(sum(0.5 * (s[b] - s[a]) * (f[a] + f[b]) for a, b in zip(index[:-1], index[1:])))


def _coarse_trapezoid(s, f):
    """Trapezoid on every other node of each corner-free piece (odd tails at fine resolution)."""
    breaks = [0] + [i + 1 for i in range(s.size - 1) if s[i + 1] == s[i]] + [s.size]
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        piece = list(range(a, b))
        coarse = piece[::2]
        if len(piece) > 1 and coarse[-1] != piece[-1]:
            coarse.append(piece[-1])
        total += _trapezoid(s, f, coarse)
    return total


def accessory_second_variation(spec: ProblemSpec, minimizer: CharTrajectory, alpha: Perturbation,
                               tol_J: float = 1e-8) -> SecondVariationReport:
    """
    J*(alpha) by trapezoidal quadrature on the minimizer grid.

    The error estimate compares against the same rule on every other node.

    Raises:
        PreconditionError: alpha not sampled on the minimizer grid, or alpha(t) != 0
    """
    s_min, first = np.unique(minimizer.s, return_index=True)
    s_alpha = np.unique(alpha.s)
    if s_alpha.size != s_min.size or not np.allclose(s_alpha, s_min, rtol=0.0, atol=1e-12):
        raise PreconditionError("⛔ perturbation grid does not match the minimizer grid",
                                hypothesis="alpha sampled on the minimizer grid")
    if np.max(np.abs(alpha.alpha[-1])) > 1e-10:
        raise PreconditionError("⛔ perturbation must vanish at the terminal time", hypothesis="alpha(t) = 0")

    X, U = minimizer.X[first], minimizer.U[first]
    Xdot = minimizer.velocity(spec)[first]
    jets = [lagrangian_jet(spec, s, x, v, u, order=2) for s, x, v, u in zip(s_min, X, Xdot, U)]
    L_u = np.array([L.u for L in jets])
    cum = cumulative_trapezoid(L_u, s_min, initial=0.0)
    weights = np.exp(cum[-1] - cum)

    node = np.searchsorted(s_min, alpha.s)
    node = np.clip(node, 0, s_min.size - 1)
    f = np.empty(alpha.s.size)
    for i, j in enumerate(node):
        L = jets[j]
        A = L.xx + 2.0 * np.outer(L.xu, L.v) + L.uu * np.outer(L.v, L.v)
        B = L.xv + np.outer(L.v, L.vu)
        a, da = alpha.alpha[i], alpha.alpha_dot[i]
        f[i] = weights[j] * (a @ A @ a + 2.0 * a @ B @ da + da @ L.vv @ da)

    a0 = alpha.alpha[0]
    hessian = np.atleast_2d(spec.initial_datum.piece_at(minimizer.seed).hessian(minimizer.seed))
    initial_term = float(np.exp(cum[-1]) * (a0 @ hessian @ a0))
    integral = _trapezoid(alpha.s, f, range(alpha.s.size))
    coarse = _coarse_trapezoid(alpha.s, f)
    report = SecondVariationReport(minimizer.seed.copy(), initial_term + integral, abs(integral - coarse) / 3.0,
                                   initial_term, integral, tol_J)
    logger.debug(f"J* = {report.value:.3e} (+/- {report.error_estimate:.1e})")
    return report


# -------------------------------
# Conjugate Witness
# -------------------------------
@dataclass
class WitnessReport:
    s_bar: float
    horizon: float
    theta: np.ndarray
    kernel_margin: float
    corner: float
    alpha: Perturbation
    second_variation: SecondVariationReport

    @property
    def J_star(self) -> float:
        return self.second_variation.value

    def to_dict(self) -> dict:
        out = {"s_bar": self.s_bar, "horizon": self.horizon, "theta": self.theta.tolist(),
               "kernel_margin": self.kernel_margin, "corner": self.corner}
        out.update(self.second_variation.to_dict())
        return out


def conjugate_witness(spec: ProblemSpec, z0, s_bar: float, t: float, control: StepPolicy = None,
                      tol_kernel: float = 1e-6) -> WitnessReport:
    """
    Broken witness alpha = X_z theta on [0, s_bar], 0 on [s_bar, t], and J*(alpha).

    theta is the smallest right singular vector of X_z(s_bar; z0). The left
    derivative at the corner is X_z' theta = (H_px X_z + H_pp P_z + H_pu U_z) theta.

    Raises:
        PreconditionError: s_bar not interior to (0, t), or X_z(s_bar) has no near-kernel
    """
    if not 0.0 < s_bar < t:
        raise PreconditionError(f"⛔ witness needs 0 < s_bar < t, got s_bar={s_bar}, t={t}",
                                hypothesis="s_bar interior")
    control = control or StepPolicy()
    grid = control.grid_through(0.0, t, [s_bar])
    var = integrate_variational(spec, z0, t, control, grid=grid)
    j_bar = int(np.flatnonzero(grid == s_bar)[0])

    _, S, Vt = np.linalg.svd(var.Xz[j_bar])
    if S[-1] > tol_kernel * max(1.0, S[0]):
        raise PreconditionError(f"⛔ X_z({s_bar}) has no kernel direction (sigma_min={S[-1]:.3e})",
                                hypothesis="theta in the near-kernel of X_z")
    theta = Vt[-1]

    n = spec.n
    char = var.char
    alpha = np.zeros((grid.size + 1, n))
    alpha_dot = np.zeros((grid.size + 1, n))
    for j in range(j_bar + 1):
        H = hamiltonian_jet(spec, grid[j], char.X[j], char.P[j], char.U[j], order=2)
        alpha[j] = var.Xz[j] @ theta
        alpha_dot[j] = (H.px @ var.Xz[j] + H.pp @ var.Pz[j] + np.outer(H.pu, var.Uz[j])) @ theta
    s_alpha = np.concatenate([grid[:j_bar + 1], [s_bar], grid[j_bar + 1:]])
    perturbation = Perturbation(s_alpha, alpha, alpha_dot)

    report = accessory_second_variation(spec, char, perturbation)
    corner = float(np.linalg.norm(alpha_dot[j_bar]))
    logger.info(f"✅ Conjugate witness at s_bar={s_bar}: J*={report.value:.3e}, corner={corner:.3f}")
    return WitnessReport(float(s_bar), float(t), theta, float(S[-1]), corner, perturbation, report)
