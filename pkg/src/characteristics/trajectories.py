"""
src/characteristics/trajectories.py
-----------------------------------

Sampled trajectory records and their CSV-ready frames:
- CharTrajectory: (X, P, U) of the Lie system
- VarTrajectory: (X_z, P_z, U_z) of the variational system
- SampledCurve: a curve xi on a time grid, with optional velocity samples
- CaratheodoryResult: u_xi along a curve
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline

from src.problem.spec import ProblemSpec


def _columns(prefix: str, n: int) -> list:
    return [f"{prefix}{i + 1}" for i in range(n)]


# -------------------------------
# Sampled Curves
# -------------------------------
@dataclass
class SampledCurve:
    """
    Curve xi(s) sampled at increasing times s.

    With velocity samples the curve is the cubic Hermite interpolant through
    (s, xi, velocity); without them it is piecewise linear, so a kink may sit
    at any node.
    """

    s: np.ndarray
    xi: np.ndarray
    velocity: Optional[np.ndarray] = None

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float).reshape(self.s.size, -1)
        if self.velocity is not None:
            self.velocity = np.asarray(self.velocity, dtype=float).reshape(self.xi.shape)
        if self.s.size < 2 or np.any(np.diff(self.s) <= 0):
            raise ValueError("⛔ curve grid must be strictly increasing with at least two nodes")
        self._spline = (CubicHermiteSpline(self.s, self.xi, self.velocity, axis=0)
                        if self.velocity is not None else None)

    @property
    def n(self) -> int:
        return self.xi.shape[1]

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.xi, axis=0) / np.diff(self.s)[:, None]

    def lipschitz(self) -> float:
        """Largest difference quotient between nodes."""
        return float(np.max(np.abs(self.slopes)))

    def segment_state(self, j: int, tau: float):
        """(xi(tau), xi'(tau)) on segment j, tau in [s_j, s_{j+1}]."""
        if self._spline is not None:
            return self._spline(tau), self._spline(tau, 1)
        slope = (self.xi[j + 1] - self.xi[j]) / (self.s[j + 1] - self.s[j])
        return self.xi[j] + (tau - self.s[j]) * slope, slope

    def position(self, tau: float) -> np.ndarray:
        if self._spline is not None:
            return self._spline(tau)
        return np.array([np.interp(tau, self.s, self.xi[:, k]) for k in range(self.n)])

    def restrict(self, a: float, b: float) -> "SampledCurve":
        """The same curve on [a, b] with both endpoints inserted as nodes."""
        if not (self.s[0] - 1e-12 <= a < b <= self.s[-1] + 1e-12):
            raise ValueError(f"⛔ [{a}, {b}] is not inside the curve interval [{self.s[0]}, {self.s[-1]}]")
        inner = self.s[(self.s > a) & (self.s < b)]
        s = np.concatenate([[a], inner, [b]])
        xi = np.array([self.position(tau) for tau in s])
        velocity = None if self._spline is None else np.array([self._spline(tau, 1) for tau in s])
        return SampledCurve(s, xi, velocity)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.xi, columns=_columns("xi", self.n))
        frame.insert(0, "s", self.s)
        if self.velocity is not None:
            for k, name in enumerate(_columns("xi_dot", self.n)):
                frame[name] = self.velocity[:, k]
        return frame


# -------------------------------
# Lie System Trajectory
# -------------------------------
@dataclass
class CharTrajectory:
    """Samples (X, P, U) of the Lie system seeded at z."""

    seed: np.ndarray
    s: np.ndarray
    X: np.ndarray
    P: np.ndarray
    U: np.ndarray
    method: str = "rk4"
    order: int = 4

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def t_end(self) -> float:
        return float(self.s[-1])

    @property
    def terminal(self):
        return self.X[-1].copy(), self.P[-1].copy(), float(self.U[-1])

    def velocity(self, spec: ProblemSpec) -> np.ndarray:
        """Xdot = H_p along the samples."""
        H = spec.hamiltonian
        if not H.time_dependent:
            return H.batch(0.0, self.X, self.P, self.U)[1]
        return np.vstack([H.batch(s, self.X[j:j + 1], self.P[j:j + 1], self.U[j:j + 1])[1]
                          for j, s in enumerate(self.s)])

    def bounds(self, spec: ProblemSpec) -> dict:
        """Empirical a-priori bound max{|X|, |Xdot|, |P|, |U|} over the samples."""
        Xdot = self.velocity(spec)
        out = {
            "max_abs_X": float(np.max(np.abs(self.X))),
            "max_abs_Xdot": float(np.max(np.abs(Xdot))),
            "max_abs_P": float(np.max(np.abs(self.P))),
            "max_abs_U": float(np.max(np.abs(self.U))),
        }
        out["bound"] = max(out.values())
        return out

    def as_curve(self, spec: ProblemSpec) -> SampledCurve:
        keep = np.concatenate([[True], np.diff(self.s) > 0])
        return SampledCurve(self.s[keep], self.X[keep], self.velocity(spec)[keep])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(np.hstack([self.X, self.P, self.U[:, None]]),
                             columns=_columns("X", self.n) + _columns("P", self.n) + ["U"])
        frame.insert(0, "s", self.s)
        return frame


# -------------------------------
# Variational System Trajectory
# -------------------------------
@dataclass
class VarTrajectory:
    """Samples (X_z, P_z, U_z) along a CharTrajectory."""

    char: CharTrajectory
    Xz: np.ndarray
    Pz: np.ndarray
    Uz: np.ndarray
    bump_report: Optional[dict] = None

    @property
    def s(self) -> np.ndarray:
        return self.char.s

    @property
    def terminal(self):
        return self.Xz[-1].copy(), self.Pz[-1].copy(), self.Uz[-1].copy()

    def det_Xz(self) -> np.ndarray:
        return np.linalg.det(self.Xz)

    def identity_residual(self) -> float:
        """max over samples of |U_z - P^T X_z|_inf."""
        PX = np.einsum("ji,jik->jk", self.char.P, self.Xz)
        return float(np.max(np.abs(self.Uz - PX)))

    def nonvanishing(self, theta) -> float:
        """min over samples of |(X_z theta, P_z theta, U_z theta)|."""
        theta = np.asarray(theta, dtype=float)
        stacked = np.hstack([self.Xz @ theta, self.Pz @ theta, (self.Uz @ theta)[:, None]])
        return float(np.min(np.linalg.norm(stacked, axis=1)))

    def to_frame(self) -> pd.DataFrame:
        n = self.char.n
        frame = self.char.to_frame()
        m = self.s.size
        for name, block in (("Xz", self.Xz), ("Pz", self.Pz)):
            flat = block.reshape(m, n * n)
            for k in range(n * n):
                frame[f"{name}{k // n + 1}{k % n + 1}"] = flat[:, k]
        for k in range(n):
            frame[f"Uz{k + 1}"] = self.Uz[:, k]
        return frame


# -------------------------------
# Caratheodory Result
# -------------------------------
@dataclass
class CaratheodoryResult:
    """u_xi along a sampled curve; residual is the step-halving difference."""

    curve: SampledCurve
    u: np.ndarray
    residual: float

    @property
    def terminal(self) -> float:
        return float(self.u[-1])

    def to_frame(self) -> pd.DataFrame:
        frame = self.curve.to_frame()
        frame["u"] = self.u
        return frame
