"""
src/characteristics/flow.py
---------------------------

Characteristic flow of u_t + H(t,x,Du,u) = 0.

Lie system:
    X' = H_p,  P' = -H_x - H_u P,  U' = P.H_p - H
    X(0) = z,  P(0) = Du0(z),  U(0) = u0(z)

Variational system (z-derivatives, integrated jointly on the same grid):
    X_z' = H_px X_z + H_pp P_z + H_pu U_z
    P_z' = -(H_xx X_z + H_xp P_z + H_xu U_z) - H_u P_z - P (H_ux X_z + H_up P_z + H_uu U_z)
    U_z' = P^T X_z' - H_x^T X_z - H_u U_z
    X_z(0) = I,  P_z(0) = D^2u0(z),  U_z(0) = Du0(z)

The last equation is the exact z-derivative of U' and keeps U_z = P^T X_z.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.characteristics.integrators import StepPolicy, integrate, rk4_step
from src.characteristics.trajectories import CaratheodoryResult, CharTrajectory, SampledCurve, VarTrajectory
from src.errors import DomainError, PreconditionError
from src.problem.spec import ProblemSpec, hamiltonian_jet, lagrangian_jet

logger = logging.getLogger(__name__)

DEFAULT_POLICY = StepPolicy()


# -------------------------------
# State Layout
# -------------------------------
def lie_size(n: int) -> int:
    return 2 * n + 1


def joint_size(n: int) -> int:
    return 2 * n + 1 + 2 * n * n + n


def split_lie(y: np.ndarray, n: int):
    return y[..., :n], y[..., n:2 * n], y[..., 2 * n]


def split_joint(y: np.ndarray, n: int):
    X, P, U = split_lie(y, n)
    base = 2 * n + 1
    lead = y.shape[:-1]
    Xz = y[..., base:base + n * n].reshape(lead + (n, n))
    Pz = y[..., base + n * n:base + 2 * n * n].reshape(lead + (n, n))
    Uz = y[..., base + 2 * n * n:]
    return X, P, U, Xz, Pz, Uz


def initial_state(spec: ProblemSpec, z, variational: bool = False) -> np.ndarray:
    """(z, Du0(z), u0(z)) and, jointly, (I, D^2u0(z), Du0(z)) for the smooth piece at z."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    n = spec.n
    if z.size != n:
        raise ValueError(f"⛔ seed has dimension {z.size}, expected {n}")
    datum = spec.initial_datum.piece_at(z)
    grad = np.atleast_1d(datum.gradient(z))
    value = float(datum.value(z))
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise DomainError(f"⛔ non-finite initial datum at z={z}", partial="u0")
    y = np.concatenate([z, grad, [value]])
    if not variational:
        return y
    hess = np.atleast_2d(datum.hessian(z))
    if not np.all(np.isfinite(hess)):
        raise DomainError(f"⛔ non-finite datum Hessian at z={z}", partial="D2u0")
    return np.concatenate([y, np.eye(n).ravel(), hess.ravel(), grad])


# -------------------------------
# Right-hand Sides
# -------------------------------
def lie_rhs(spec: ProblemSpec):
    n = spec.n

    def rhs(t, y):
        x, p, u = split_lie(y, n)
        H = hamiltonian_jet(spec, t, x, p, u, order=1)
        out = np.empty_like(y)
        out[:n] = H.p
        out[n:2 * n] = -H.x - H.u * p
        out[2 * n] = float(p @ H.p) - H.value
        return out

    return rhs


def joint_rhs(spec: ProblemSpec):
    n = spec.n
    base = 2 * n + 1

    def rhs(t, y):
        x, p, u, Xz, Pz, Uz = split_joint(y, n)
        H = hamiltonian_jet(spec, t, x, p, u, order=2)
        H_px = H.px
        dXz = H_px @ Xz + H.pp @ Pz + np.outer(H.pu, Uz)
        u_row = H.xu @ Xz + H.pu @ Pz + H.uu * Uz
        dPz = -(H.xx @ Xz + H_px.T @ Pz + np.outer(H.xu, Uz)) - H.u * Pz - np.outer(p, u_row)
        dUz = p @ dXz - H.x @ Xz - H.u * Uz

        out = np.empty_like(y)
        out[:n] = H.p
        out[n:2 * n] = -H.x - H.u * p
        out[2 * n] = float(p @ H.p) - H.value
        out[base:base + n * n] = dXz.ravel()
        out[base + n * n:base + 2 * n * n] = dPz.ravel()
        out[base + 2 * n * n:] = dUz
        return out

    return rhs


# -------------------------------
# Integration Entry Points
# -------------------------------
def _resolve_grid(control: StepPolicy, t0: float, t1: float, grid):
    if grid is None:
        return control.grid(t0, t1)
    grid = np.asarray(grid, dtype=float)
    if grid[0] != t0 or grid[-1] != t1:
        raise ValueError(f"⛔ explicit grid must run from {t0} to {t1}")
    return grid


def propagate(spec: ProblemSpec, t0: float, state, t1: float, control: StepPolicy = None,
              variational: bool = False, grid=None):
    """
    Integrate the Lie (or joint) system from an arbitrary state at t0 to t1.

    t1 < t0 integrates backward.

    Returns:
        tuple: (grid, states) with states of shape (len(grid), state size)
    """
    control = control or DEFAULT_POLICY
    state = np.asarray(state, dtype=float)
    expected = joint_size(spec.n) if variational else lie_size(spec.n)
    if state.size != expected:
        raise ValueError(f"⛔ state has size {state.size}, expected {expected}")
    grid = _resolve_grid(control, t0, t1, grid)
    rhs = joint_rhs(spec) if variational else lie_rhs(spec)
    return grid, integrate(rhs, grid, state, control)


def integrate_lie(spec: ProblemSpec, z, t_end: float, control: StepPolicy = None, grid=None) -> CharTrajectory:
    """
    Characteristic (X, P, U) seeded at z on [0, t_end].

    Raises:
        PreconditionError: t_end <= 0
        IntegrationError: adaptive step underflow
        DomainError: non-finite state or partial
    """
    if t_end <= 0:
        raise PreconditionError(f"⛔ t_end must be positive, got {t_end}", hypothesis="t_end > 0")
    control = control or DEFAULT_POLICY
    y0 = initial_state(spec, z)
    s, Y = propagate(spec, 0.0, y0, t_end, control, grid=grid)
    X, P, U = split_lie(Y, spec.n)
    logger.debug(f"Lie system integrated from z={y0[:spec.n]} to t={t_end} ({s.size} nodes)")
    return CharTrajectory(y0[:spec.n].copy(), s, X.copy(), P.copy(), U.copy(), control.method, control.order)


def integrate_variational(spec: ProblemSpec, z, t_end: float, control: StepPolicy = None, grid=None,
                          cross_check: bool = True) -> VarTrajectory:
    """
    Joint integration of the Lie and variational systems seeded at z.

    In finite-difference mode the result is cross-checked against a
    bump-and-difference of integrate_lie (stored on the trajectory).
    """
    if t_end <= 0:
        raise PreconditionError(f"⛔ t_end must be positive, got {t_end}", hypothesis="t_end > 0")
    control = control or DEFAULT_POLICY
    y0 = initial_state(spec, z, variational=True)
    n = spec.n
    s, Y = propagate(spec, 0.0, y0, t_end, control, variational=True, grid=grid)
    X, P, U, Xz, Pz, Uz = split_joint(Y, n)
    char = CharTrajectory(y0[:n].copy(), s, X.copy(), P.copy(), U.copy(), control.method, control.order)
    var = VarTrajectory(char, Xz.copy(), Pz.copy(), Uz.copy())
    if cross_check and spec.derivative_mode == "finite_difference":
        var.bump_report = bump_check(spec, y0[:n], t_end, control, reference=var)
    return var


def bump_check(spec: ProblemSpec, z, t_end: float, control: StepPolicy = None, bump: float = 1e-5,
               reference: VarTrajectory = None) -> dict:
    """
    Two-sided bump-and-difference of integrate_lie against (X_z, P_z, U_z) at t_end.

    Returns:
        dict: max absolute gaps for X_z, P_z, U_z and their max
    """
    control = control or DEFAULT_POLICY
    z = np.atleast_1d(np.asarray(z, dtype=float))
    n = spec.n
    if reference is None:
        reference = integrate_variational(spec, z, t_end, control, cross_check=False)
    Xz, Pz, Uz = reference.terminal
    fd_X, fd_P, fd_U = np.empty((n, n)), np.empty((n, n)), np.empty(n)
    for k in range(n):
        h = bump * (1.0 + abs(z[k]))
        e = np.zeros(n)
        e[k] = h
        Xp, Pp, Up = integrate_lie(spec, z + e, t_end, control).terminal
        Xm, Pm, Um = integrate_lie(spec, z - e, t_end, control).terminal
        fd_X[:, k] = (Xp - Xm) / (2 * h)
        fd_P[:, k] = (Pp - Pm) / (2 * h)
        fd_U[k] = (Up - Um) / (2 * h)
    report = {
        "Xz_gap": float(np.max(np.abs(fd_X - Xz))),
        "Pz_gap": float(np.max(np.abs(fd_P - Pz))),
        "Uz_gap": float(np.max(np.abs(fd_U - Uz))),
    }
    report["max_gap"] = max(report.values())
    if report["max_gap"] > 1e-4 * (1.0 + float(np.max(np.abs(Pz)))):
        logger.warning(f"⚠️ Bump check disagrees with the variational system: {report}")
    return report


# -------------------------------
# Caratheodory Equation
# -------------------------------
def caratheodory_values(spec: ProblemSpec, curve: SampledCurve, u_init: float, substeps: int = 1) -> np.ndarray:
    """u_xi at the curve nodes, RK4 with `substeps` steps per segment."""
    n = spec.n

    def make_rhs(j):
        def rhs(tau, u):
            xi, xi_dot = curve.segment_state(j, tau)
            return np.array([lagrangian_jet(spec, tau, xi[:n], xi_dot[:n], u[0], order=0).value])
        return rhs

    u = np.empty(curve.s.size)
    u[0] = float(u_init)
    state = np.array([float(u_init)])
    for j in range(curve.s.size - 1):
        rhs = make_rhs(j)
        h = (curve.s[j + 1] - curve.s[j]) / substeps
        for k in range(substeps):
            state = rk4_step(rhs, curve.s[j] + k * h, state, h)
        u[j + 1] = state[0]
    return u


def caratheodory_solve(spec: ProblemSpec, curve: SampledCurve, u_init: float, substeps: int = 1) -> CaratheodoryResult:
    """
    Solve u' = L(s, xi, xi', u), u(t1) = u_init along a sampled curve.

    Each segment is integrated separately, so kinks at nodes are honoured.
    The residual is the gap to the same scheme with halved steps.

    Raises:
        PreconditionError: curve is not Lipschitz (non-finite difference quotients)
        DomainError: non-finite L along the curve
    """
    if not np.isfinite(curve.lipschitz()):
        raise PreconditionError("⛔ curve difference quotients are not finite", hypothesis="Lipschitz curve")
    u = caratheodory_values(spec, curve, u_init, substeps)
    u_fine = caratheodory_values(spec, curve, u_init, 2 * substeps)
    residual = float(np.max(np.abs(u - u_fine)))
    return CaratheodoryResult(curve, u, residual)


# -------------------------------
# Herglotz Certificates
# -------------------------------
@dataclass(frozen=True)
class HerglotzReport:
    euler_lagrange: float
    momentum_gap: float

    @property
    def residual(self) -> float:
        return max(self.euler_lagrange, self.momentum_gap)


def _derivative(samples: np.ndarray, s: np.ndarray):
    """Interior derivative samples: 4th-order central on uniform grids, np.gradient otherwise."""
    h = np.diff(s)
    if s.size >= 5 and np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        d = (-samples[4:] + 8 * samples[3:-1] - 8 * samples[1:-3] + samples[:-4]) / (12 * h[0])
        return np.arange(2, s.size - 2), d
    d = np.gradient(samples, s, axis=0, edge_order=2)
    return np.arange(1, s.size - 1), d[1:-1]


def herglotz_report(spec: ProblemSpec, traj: CharTrajectory) -> HerglotzReport:
    """
    Both Herglotz components along a characteristic.

    - euler_lagrange: max |d/ds L_v - (L_x + L_u L_v)| along (s, X, H_p, U)
    - momentum_gap:   max |P - L_v(s, X, X', U)| with X' differentiated from the samples
    """
    keep = np.concatenate([[True], np.diff(traj.s) != 0.0])
    s, X, P, U = traj.s[keep], traj.X[keep], traj.P[keep], traj.U[keep]
    if s.size < 3:
        raise PreconditionError("⛔ Herglotz check needs at least three distinct nodes", hypothesis="grid size")
    Xdot = traj.velocity(spec)[keep]

    n = spec.n
    L_v = np.empty_like(X)
    rhs = np.empty_like(X)
    for j in range(s.size):
        L = lagrangian_jet(spec, s[j], X[j], Xdot[j], U[j], order=1)
        L_v[j] = L.v
        rhs[j] = L.x + L.u * L.v

    index, dL_v = _derivative(L_v, s)
    euler_lagrange = float(np.max(np.abs(dL_v - rhs[index])))

    index, Xdot_fd = _derivative(X, s)
    gaps = [np.max(np.abs(P[j] - lagrangian_jet(spec, s[j], X[j], Xdot_fd[i], U[j], order=1).v))
            for i, j in enumerate(index)]
    momentum_gap = float(np.max(gaps)) if gaps else 0.0
    logger.debug(f"Herglotz report (n={n}): EL={euler_lagrange:.3e}, momentum={momentum_gap:.3e}")
    return HerglotzReport(euler_lagrange, momentum_gap)


def herglotz_residual(spec: ProblemSpec, traj: CharTrajectory) -> float:
    return herglotz_report(spec, traj).residual
