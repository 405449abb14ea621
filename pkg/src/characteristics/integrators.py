"""
src/characteristics/integrators.py
----------------------------------

ODE integration on explicit time grids.

- "rk4": classical fixed-step Runge-Kutta (reproducible default)
- "RK45" / "DOP853": embedded adaptive pairs through scipy.integrate.solve_ivp,
  sampled on the same grid through t_eval

Grids may run backward in time (decreasing) and may repeat a node; a repeated
node is a zero-length step and copies the state.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from src.errors import DomainError, IntegrationError

logger = logging.getLogger(__name__)

METHODS = ("rk4", "RK45", "DOP853")


@dataclass(frozen=True)
class StepPolicy:
    """
    Step control for every characteristic integration.

    Attributes:
        method (str): "rk4", "RK45" or "DOP853"
        step (float): fixed step (rk4) and sampling step (adaptive)
        rtol, atol (float): adaptive tolerances
        min_step (float): adaptive step underflow threshold
        tol_ode (float): per-unit-time accuracy target used by certificates
    """

    method: str = "rk4"
    step: float = 1e-2
    rtol: float = 1e-11
    atol: float = 1e-13
    min_step: float = 1e-12
    tol_ode: float = 1e-8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"Unsupported integration method: choose one of {METHODS}")
        if self.step <= 0:
            raise ValueError(f"⛔ step must be positive, got {self.step}")

    @property
    def order(self) -> int:
        return {"rk4": 4, "RK45": 5, "DOP853": 8}[self.method]

    def grid(self, t0: float, t1: float) -> np.ndarray:
        """Uniform grid from t0 to t1 (either direction) with spacing <= step."""
        if t1 == t0:
            return np.array([t0])
        count = max(1, math.ceil(abs(t1 - t0) / self.step - 1e-9))
        grid = np.linspace(t0, t1, count + 1)
        grid[-1] = t1
        return grid

    def grid_through(self, t0: float, t1: float, nodes) -> np.ndarray:
        """Uniform pieces between t0, the given interior nodes and t1 (nodes kept exactly)."""
        lo, hi = min(t0, t1), max(t0, t1)
        inner = sorted({float(s) for s in nodes if lo < s < hi}, reverse=t1 < t0)
        marks = [t0] + inner + [t1]
        pieces = [self.grid(a, b) for a, b in zip(marks[:-1], marks[1:])]
        return np.concatenate([pieces[0]] + [p[1:] for p in pieces[1:]])


# -------------------------------
# Fixed-step RK4
# -------------------------------
def rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(rhs, grid: np.ndarray, y0: np.ndarray) -> np.ndarray:
    """
    Integrate y' = rhs(t, y) on an explicit grid.

    Returns:
        np.ndarray: states, shape (len(grid), len(y0))

    Raises:
        DomainError: if the state becomes non-finite
    """
    Y = np.empty((grid.size, y0.size))
    Y[0] = y0
    for j in range(grid.size - 1):
        h = grid[j + 1] - grid[j]
        if h == 0.0:
            Y[j + 1] = Y[j]
            continue
        Y[j + 1] = rk4_step(rhs, grid[j], Y[j], h)
        if not np.all(np.isfinite(Y[j + 1])):
            raise DomainError(f"⛔ non-finite state at t={grid[j + 1]:.6g}", partial="state")
    return Y


# -------------------------------
# Adaptive pairs
# -------------------------------
def adaptive_integrate(rhs, grid: np.ndarray, y0: np.ndarray, policy: StepPolicy) -> np.ndarray:
    """
    Integrate with an embedded pair and sample on the grid.

    Raises:
        IntegrationError: step underflow or solver failure (carries the last good time)
    """
    if grid.size == 1:
        return y0[None, :].copy()
    keep = np.concatenate([[True], np.diff(grid) != 0.0])
    unique = grid[keep]
    sol = solve_ivp(rhs, (unique[0], unique[-1]), y0, method=policy.method, t_eval=unique,
                    rtol=policy.rtol, atol=policy.atol, first_step=min(policy.step, abs(unique[-1] - unique[0])))
    if sol.status != 0 or sol.y.shape[1] != unique.size:
        last = float(sol.t[-1]) if sol.t.size else float(grid[0])
        raise IntegrationError(f"⛔ {policy.method} failed near t={last:.6g}: {sol.message}", last_time=last)
    Y_unique = sol.y.T
    if not np.all(np.isfinite(Y_unique)):
        raise DomainError("⛔ non-finite state in adaptive integration", partial="state")
    # Repeated nodes copy the previous state
    index = np.cumsum(keep) - 1
    return Y_unique[index]


def integrate(rhs, grid: np.ndarray, y0: np.ndarray, policy: StepPolicy) -> np.ndarray:
    y0 = np.asarray(y0, dtype=float)
    if policy.method == "rk4":
        return rk4_integrate(rhs, grid, y0)
    return adaptive_integrate(rhs, grid, y0, policy)
