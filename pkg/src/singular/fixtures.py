"""
src/singular/fixtures.py
------------------------

Closed-form two-branch fixtures.

For H = |p|^2/2 + lam*u and u0 = min(a1.x, a2.x) the solution is min(v1, v2) with

    v_i(t, x) = e^{-lam t} a_i.x - |a_i|^2 e^{-lam t} g(t) / 2,   g(t) = (1 - e^{-lam t}) / lam

(g(t) = t when lam = 0), and the singular set is the hyperplane v1 = v2:

    (a1 - a2).x = g(t) (|a1|^2 - |a2|^2) / 2

which in one dimension is x(t) = (a1 + a2) g(t) / 2.
"""

from dataclasses import dataclass

import numpy as np

from src.cut_locus.branches import AnalyticSheet
from src.problem.data import LinearDatum, MinDatum
from src.problem.families import classical_quadratic, contact_discounted
from src.problem.spec import ProblemSpec


def _slope(a, n):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.size == 1 and n > 1:
        a = a[0] * np.eye(n)[0]
    return a


@dataclass
class TwoBranchFixture:
    spec: ProblemSpec
    a1: np.ndarray
    a2: np.ndarray
    discount: float

    def g(self, t: float) -> float:
        lam = self.discount
        return t if lam == 0 else (1.0 - np.exp(-lam * t)) / lam

    def branch_value(self, a, t, x) -> float:
        decay = np.exp(-self.discount * t)
        return float(decay * (a @ np.atleast_1d(x)) - 0.5 * (a @ a) * decay * self.g(t))

    def branch_gradient(self, a, t, x):
        p = np.exp(-self.discount * t) * a
        q = -(0.5 * float(p @ p) + self.discount * self.branch_value(a, t, x))
        return q, p

    def value(self, t: float, x) -> float:
        return min(self.branch_value(self.a1, t, x), self.branch_value(self.a2, t, x))

    @property
    def sheets(self) -> list:
        return [AnalyticSheet(i, lambda t, x, a=a: self.branch_value(a, t, x),
                              lambda t, x, a=a: self.branch_gradient(a, t, x))
                for i, a in enumerate((self.a1, self.a2))]

    def piece_specs(self) -> list:
        return [self.spec.with_datum(LinearDatum(a)) for a in (self.a1, self.a2)]

    def interface(self, t: float) -> np.ndarray:
        """Point of the singular hyperplane at time t closest to the origin."""
        d = self.a1 - self.a2
        return d * self.g(t) * (self.a1 @ self.a1 - self.a2 @ self.a2) / (2.0 * float(d @ d))

    def interface_speed(self, t: float) -> np.ndarray:
        d = self.a1 - self.a2
        return d * np.exp(-self.discount * t) * (self.a1 @ self.a1 - self.a2 @ self.a2) / (2.0 * float(d @ d))


def two_branch_fixture(a1=1.0, a2=-1.0, discount: float = 0.0, n: int = 1, **options) -> TwoBranchFixture:
    """
    Two-branch fixture with datum min(a1.x, a2.x).

    discount = 0 gives the classical_quadratic family, discount > 0 the
    contact_discounted family.
    """
    a1, a2 = _slope(a1, n), _slope(a2, n)
    if np.allclose(a1, a2):
        raise ValueError("⛔ two-branch fixture needs a1 != a2")
    datum = MinDatum([LinearDatum(a1), LinearDatum(a2)])
    if discount == 0:
        spec = classical_quadratic(n, datum=datum, **options)
    else:
        spec = contact_discounted(n, discount, datum=datum, **options)
    return TwoBranchFixture(spec, a1, a2, float(discount))
