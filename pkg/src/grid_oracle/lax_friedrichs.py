"""
src/grid_oracle/lax_friedrichs.py
---------------------------------

Monotone Lax-Friedrichs scheme for u_t + H(t, x, Du, u) = 0 on 1D / 2D boxes.

    u^{m+1} = u^m - dt [ H(t_m, x, D_c u^m, u^m) - sum_a nu_a (u_{+a} - 2u + u_{-a}) / (2 dx_a) ]

with central differences D_c, nu_a = max over the slice of |H_{p_a}|, and
ghost nodes by linear extrapolation. The u-coupling is explicit. The grid
solution is an independent oracle for values and kink locations.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from src.errors import CflViolation, DomainError, PreconditionError
from src.problem.spec import ProblemSpec

logger = logging.getLogger(__name__)


@dataclass
class GridSolution:
    """
    Attributes:
        axes (list): node coordinates per axis
        dx (np.ndarray): spacing per axis
        dt (float): nominal time step
        times (np.ndarray): times of the stored slices
        values (np.ndarray): u on the grid, shape (len(times), *grid shape)
        cfl (float): largest dt * (sum_a nu_a / dx_a + max|H_u|) used
        viscosity (np.ndarray): nu_a per stored step
        advisory (bool): H_u < 0 was observed, monotonicity in u is not guaranteed
    """

    axes: list
    dx: np.ndarray
    dt: float
    times: np.ndarray
    values: np.ndarray
    cfl: float
    viscosity: np.ndarray
    advisory: bool = False
    family: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def box(self) -> tuple:
        return np.array([a[0] for a in self.axes]), np.array([a[-1] for a in self.axes])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def slice_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def interpolate(self, t: float, x) -> float:
        """Multilinear in space, linear in time."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        j = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 1))
        k = min(j + 1, self.times.size - 1)
        u_j = RegularGridInterpolator(self.axes, self.values[j])(x[None, :])[0]
        if k == j:
            return float(u_j)
        u_k = RegularGridInterpolator(self.axes, self.values[k])(x[None, :])[0]
        w = (t - self.times[j]) / (self.times[k] - self.times[j])
        return float((1.0 - w) * u_j + w * u_k)

    def contains(self, t: float, x) -> bool:
        lo, hi = self.box
        x = np.atleast_1d(x)
        return bool(0.0 <= t <= self.horizon + 1e-12 and np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12))

    def to_frame(self, every: int = 1) -> pd.DataFrame:
        """Long-format slices: t, x1.., u."""
        nodes = self.nodes()
        frames = []
        for j in range(0, self.times.size, every):
            frame = pd.DataFrame(nodes, columns=[f"x{i + 1}" for i in range(self.n)])
            frame.insert(0, "t", self.times[j])
            frame["u"] = self.values[j].ravel()
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def metadata(self) -> dict:
        lo, hi = self.box
        return {"box": [lo.tolist(), hi.tolist()], "dx": self.dx.tolist(), "dt": self.dt,
                "horizon": self.horizon, "slices": int(self.times.size), "cfl": self.cfl,
                "max_viscosity": self.viscosity.max(axis=0).tolist() if self.viscosity.size else [],
                "advisory": self.advisory, "family": self.family, **self.meta}


# -------------------------------
# Solver
# -------------------------------
def _axes(box, dx):
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    if lo.size not in (1, 2) or lo.size != hi.size:
        raise PreconditionError(f"⛔ the grid oracle supports 1D and 2D boxes, got dimension {lo.size}",
                                hypothesis="n in {1, 2}")
    if np.any(lo >= hi):
        raise PreconditionError(f"⛔ empty box {lo.tolist()} .. {hi.tolist()}", hypothesis="box min < max")
    dx = np.broadcast_to(np.asarray(dx, dtype=float), lo.shape)
    counts = [int(round((b - a) / h)) + 1 for a, b, h in zip(lo, hi, dx)]
    axes = [np.linspace(a, b, m) for a, b, m in zip(lo, hi, counts)]
    return axes, np.array([(b - a) / (m - 1) for a, b, m in zip(lo, hi, counts)])


def _differences(u, dx):
    """Central first differences and second differences with linear-extrapolation ghosts."""
    Dc, D2 = [], []
    for a, h in enumerate(dx):
        pad = [(0, 0)] * u.ndim
        pad[a] = (1, 1)
        w = np.pad(u, pad, mode="reflect", reflect_type="odd")
        plus = np.take(w, np.arange(2, w.shape[a]), axis=a)
        minus = np.take(w, np.arange(0, w.shape[a] - 2), axis=a)
        Dc.append((plus - minus) / (2.0 * h))
        D2.append(plus - 2.0 * u + minus)
    return Dc, D2


def lf_solve(spec: ProblemSpec, box, dx, dt: float = None, T: float = 1.0, cfl: float = 0.9,
             save_every: int = 1) -> GridSolution:
    """
    Lax-Friedrichs solution on a box up to time T.

    Args:
        spec (ProblemSpec): problem (n = 1 or 2)
        box (tuple): (lo, hi)
        dx (float | array): spacing per axis
        dt (float): fixed time step; None picks it from the CFL bound each step
        T (float): final time (hit exactly)
        cfl (float): CFL bound
        save_every (int): store every m-th slice (the first and last are always stored)

    Raises:
        CflViolation: a fixed dt breaks the CFL bound; carries the solution so far
        DomainError: the solution became non-finite
    """
    if T <= 0:
        raise PreconditionError(f"⛔ horizon must be positive, got {T}", hypothesis="T > 0")
    axes, dx = _axes(box, dx)
    if spec.n != len(axes):
        raise PreconditionError(f"⛔ box dimension {len(axes)} does not match problem dimension {spec.n}",
                                hypothesis="box dimension = n")
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    shape = mesh[0].shape
    u = spec.initial_datum.values(X).reshape(shape)

    times, slices, nus = [0.0], [u.copy()], []
    t, step, worst, advisory = 0.0, 0, 0.0, False

    def partial():
        return GridSolution(axes, dx, dt or float("nan"), np.array(times), np.array(slices), worst,
                            np.array(nus), advisory, spec.family)

    while t < T - 1e-14:
        Dc, D2 = _differences(u, dx)
        P = np.stack([d.ravel() for d in Dc], axis=1)
        H, H_p, H_u = spec.hamiltonian.batch(t, X, P, u.ravel())
        nu = np.max(np.abs(H_p), axis=0)
        rate = float(np.sum(nu / dx) + np.max(np.abs(H_u)))
        if np.any(H_u < 0):
            advisory = True
        if dt is None:
            headroom = float(np.sum(np.maximum(nu, 1.0) / dx) + np.max(np.abs(H_u)))
            h = cfl / headroom
        else:
            h = dt
            if h * rate > cfl:
                logger.error(f"❌ CFL violated at t={t:.6g}: dt * rate = {h * rate:.3f} > {cfl}")
                raise CflViolation(f"⛔ CFL violated at t={t:.6g} ({h * rate:.3f} > {cfl})", solution=partial())
        h = min(h, T - t)
        viscous = sum(n_a * d2 / (2.0 * h_a) for n_a, d2, h_a in zip(nu, D2, dx))
        u = u - h * (H.reshape(shape) - viscous)
        if not np.all(np.isfinite(u)):
            raise DomainError(f"⛔ non-finite grid solution at t={t + h:.6g}", partial="u")
        t = T if T - (t + h) < 1e-14 else t + h
        step += 1
        worst = max(worst, h * rate)
        if step % save_every == 0 or t >= T:
            times.append(t)
            slices.append(u.copy())
            nus.append(nu)

    sol = GridSolution(axes, dx, dt if dt is not None else float(T / step), np.array(times), np.array(slices),
                       worst, np.array(nus), advisory, spec.family, {"steps": step})
    if advisory:
        logger.warning("⚠️ H_u < 0 observed: the grid oracle is advisory for this problem")
    logger.info(f"✅ Lax-Friedrichs solve: {step} steps to T={T}, grid {list(shape)}, CFL {worst:.3f}")
    return sol


# -------------------------------
# Kink Detection
# -------------------------------
@dataclass
class GridCells:
    t: float
    index: int
    points: np.ndarray
    jumps: np.ndarray


def detect_singular_grid(sol: GridSolution, jump_tol: float, slices=None) -> list:
    """
    Per stored slice, the nodes where forward and backward slopes differ by more
    than jump_tol on some axis.
    """
    slices = range(sol.times.size) if slices is None else slices
    nodes = sol.nodes()
    found = []
    for j in slices:
        u = sol.values[j]
        jump = np.zeros(u.shape)
        for a, h in enumerate(sol.dx):
            d = np.diff(u, axis=a) / h
            inner = [slice(None)] * u.ndim
            inner[a] = slice(1, -1)
            jump[tuple(inner)] = np.maximum(jump[tuple(inner)],
                                            np.abs(np.diff(d, axis=a)))
        flat = jump.ravel()
        hit = np.flatnonzero(flat > jump_tol)
        found.append(GridCells(float(sol.times[j]), int(j), nodes[hit], flat[hit]))
    return found


def singular_locations(sol: GridSolution, flags: list = None, jump_tol: float = None) -> pd.DataFrame:
    """Per-slice interface estimate: the flagged node with the largest slope jump."""
    if flags is None:
        flags = detect_singular_grid(sol, 10.0 * float(np.max(sol.dx)) if jump_tol is None else jump_tol)
    rows = []
    for cells in flags:
        row = {"t": cells.t}
        if len(cells.jumps):
            k = int(np.argmax(cells.jumps))
            row.update({f"x{i + 1}": v for i, v in enumerate(cells.points[k])})
            row["jump"] = float(cells.jumps[k])
        else:
            row.update({f"x{i + 1}": float("nan") for i in range(sol.n)})
            row["jump"] = 0.0
        row["flagged"] = int(len(cells.jumps))
        rows.append(row)
    return pd.DataFrame(rows)


# -------------------------------
# Comparison
# -------------------------------
def compare(sol: GridSolution, points, values) -> dict:
    """
    Error statistics of the grid solution against supplied values at (t, x) points.

    Points outside the box or the time range are excluded and listed.
    """
    per_point, excluded = [], []
    for i, ((t, x), v) in enumerate(zip(points, values)):
        if not sol.contains(t, x):
            excluded.append(i)
            continue
        per_point.append(abs(sol.interpolate(t, x) - v))
    if excluded:
        logger.warning(f"⚠️ {len(excluded)} comparison points outside the grid were excluded")
    if not per_point:
        return {"max": float("nan"), "mean": float("nan"), "count": 0, "per_point": [], "excluded": excluded}
    errors = np.array(per_point)
    return {"max": float(errors.max()), "mean": float(errors.mean()), "count": int(errors.size),
            "per_point": errors.tolist(), "excluded": excluded}


def convergence_ratio(spec: ProblemSpec, box, dx: float, T: float, points, values) -> float:
    """max error at dx divided by max error at dx/2 (CFL-scaled time steps)."""
    coarse = compare(lf_solve(spec, box, dx, T=T), points, values)["max"]
    fine = compare(lf_solve(spec, box, dx / 2.0, T=T), points, values)["max"]
    ratio = coarse / fine if fine > 0 else math.inf
    logger.info(f"✅ Grid convergence ratio {ratio:.3f} (errors {coarse:.3e} -> {fine:.3e})")
    return ratio
