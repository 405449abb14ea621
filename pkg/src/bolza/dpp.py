"""
src/bolza/dpp.py
----------------

Dynamic programming certificate along a curve:

    u(t, xi(t)) <= u(t', xi(t')) + int_{t'}^{t} L(s, xi, xi', u_xi) ds

with equality exactly along minimizers.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.bolza.shooting import ShootingOptions, value
from src.characteristics.flow import caratheodory_solve
from src.characteristics.trajectories import SampledCurve
from src.errors import PreconditionError
from src.problem.spec import ProblemSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DppCertificate:
    t_prime: float
    t: float
    lhs: float
    rhs: float
    tol: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.slack >= -self.tol

    @property
    def tight(self) -> bool:
        return abs(self.slack) <= self.tol

    def to_dict(self) -> dict:
        return {"t_prime": self.t_prime, "t": self.t, "lhs": self.lhs, "rhs": self.rhs,
                "slack": self.slack, "holds": self.holds, "tight": self.tight}


def _value_at(spec, t, x, options):
    if t == 0.0:
        return float(spec.initial_datum.value(x))
    return value(spec, t, x, options=options)[0]


def dpp_certificate(spec: ProblemSpec, curve: SampledCurve, t_prime: float, t: float,
                    options: ShootingOptions = None, tol_dpp: float = 1e-6,
                    substeps: int = 2) -> DppCertificate:
    """
    Both sides of the dynamic programming inequality on [t_prime, t].

    The running cost is u_xi(t) - u_xi(t_prime) with u_xi(t_prime) = u(t_prime, xi(t_prime)).

    Raises:
        PreconditionError: t_prime > t, or [t_prime, t] outside the curve
        ShootingError: value not computable at an endpoint
    """
    if not 0.0 <= t_prime < t:
        raise PreconditionError(f"⛔ need 0 <= t' < t, got t'={t_prime}, t={t}", hypothesis="0 <= t' <= t")
    piece = curve.restrict(t_prime, t)
    u_prime = _value_at(spec, t_prime, piece.xi[0], options)
    lhs = _value_at(spec, t, piece.xi[-1], options)
    rhs = caratheodory_solve(spec, piece, u_prime, substeps).terminal
    certificate = DppCertificate(float(t_prime), float(t), float(lhs), float(rhs), tol_dpp)
    logger.debug(f"DPP on [{t_prime}, {t}]: slack={certificate.slack:.3e}")
    if not certificate.holds:
        logger.warning(f"⚠️ DPP inequality violated: slack={certificate.slack:.3e} < -{tol_dpp}")
    return certificate


def zigzag_curve(t1: float, t2: float, x, teeth: int, slope: float = 1.0) -> SampledCurve:
    """Zig-zag from x back to x with |xi'| = slope on each tooth, in the first coordinate."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.linspace(t1, t2, 2 * teeth + 1)
    xi = np.repeat(x[None, :], s.size, axis=0)
    half = (t2 - t1) / (2 * teeth)
    xi[1::2, 0] += slope * half
    return SampledCurve(s, xi)
