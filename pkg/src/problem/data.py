"""
src/problem/data.py
-------------------

Initial data u0 with gradient and Hessian.

Every datum exposes value / gradient / hessian and piece_at(z), the smooth
piece active at z (the datum itself for smooth data). Characteristics are
always seeded from the smooth piece, so piecewise data built from smooth
pieces reuse the whole machinery.
"""

import numpy as np

from src.problem.hamiltonians import _monomial_jet, parse_terms


class InitialDatum:
    """Base class for u0: R^n -> R."""

    is_smooth = True
    kind = "abstract"

    def __init__(self, n: int):
        self.n = int(n)

    def value(self, z) -> float:
        raise NotImplementedError

    def gradient(self, z) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, z) -> np.ndarray:
        raise NotImplementedError

    def piece_at(self, z) -> "InitialDatum":
        return self

    def values(self, Z: np.ndarray) -> np.ndarray:
        """Vectorised value over rows of Z (N, n)."""
        return np.array([self.value(z) for z in Z])

    def describe(self) -> dict:
        return {"kind": self.kind}


class LinearDatum(InitialDatum):
    """u0(z) = a.z + b."""

    kind = "linear"

    def __init__(self, slope, offset: float = 0.0):
        slope = np.atleast_1d(np.asarray(slope, dtype=float))
        super().__init__(slope.size)
        self.slope = slope
        self.offset = float(offset)

    def value(self, z):
        return float(self.slope @ np.atleast_1d(z)) + self.offset

    def gradient(self, z):
        return self.slope.copy()

    def hessian(self, z):
        return np.zeros((self.n, self.n))

    def values(self, Z):
        return Z @ self.slope + self.offset

    def describe(self):
        return {"kind": self.kind, "slope": self.slope.tolist(), "offset": self.offset}


class ConstantDatum(LinearDatum):
    """u0(z) = c."""

    kind = "constant"

    def __init__(self, n: int, constant: float):
        super().__init__(np.zeros(n), constant)

    def describe(self):
        return {"kind": self.kind, "constant": self.offset}


class QuadraticDatum(InitialDatum):
    """u0(z) = -c |z - center|^2 / 2 (focusing for c > 0)."""

    kind = "quadratic"

    def __init__(self, n: int, curvature: float = 1.0, center=None):
        super().__init__(n)
        self.curvature = float(curvature)
        self.center = np.zeros(n) if center is None else np.asarray(center, dtype=float)

    def value(self, z):
        d = np.atleast_1d(z) - self.center
        return -0.5 * self.curvature * float(d @ d)

    def gradient(self, z):
        return -self.curvature * (np.atleast_1d(z) - self.center)

    def hessian(self, z):
        return -self.curvature * np.eye(self.n)

    def values(self, Z):
        D = Z - self.center
        return -0.5 * self.curvature * np.sum(D * D, axis=1)

    def describe(self):
        return {"kind": self.kind, "curvature": self.curvature, "center": self.center.tolist()}


class DoubleWellDatum(InitialDatum):
    """u0(z) = -sum_j log(e^{z_j} + e^{-z_j}), a smooth symmetric double well."""

    kind = "double_well"

    def value(self, z):
        z = np.atleast_1d(z)
        return -float(np.sum(np.logaddexp(z, -z)))

    def gradient(self, z):
        return -np.tanh(np.atleast_1d(z))

    def hessian(self, z):
        return -np.diag(1.0 - np.tanh(np.atleast_1d(z)) ** 2)

    def values(self, Z):
        return -np.sum(np.logaddexp(Z, -Z), axis=1)


class PolynomialDatum(InitialDatum):
    """u0(z) = sum c * prod z^e, table rows {"coef": c, "x": [..n ints]}."""

    kind = "polynomial"

    def __init__(self, n: int, table):
        super().__init__(n)
        rows = []
        for r in table:
            coef = r.get("coef", 1.0)
            rows.append({"coef": [coef if np.isscalar(coef) else coef[0]],
                         "x": r.get("x", [0] * n), "y": [0] * n, "u": 0})
        self.terms = parse_terms(rows, n)
        self.table = list(table)

    def _jet(self, z, order):
        w = np.concatenate([np.atleast_1d(z), np.zeros(self.n + 1)])
        value, grad, hess = 0.0, np.zeros(w.size), np.zeros((w.size, w.size))
        for term in self.terms:
            v, g, h = _monomial_jet(w, term.exponents, order)
            c = term.time_coefs[0]
            value += c * v
            if g is not None:
                grad += c * g
            if h is not None:
                hess += c * h
        return value, grad[:self.n], hess[:self.n, :self.n]

    def value(self, z):
        return self._jet(z, 0)[0]

    def gradient(self, z):
        return self._jet(z, 1)[1]

    def hessian(self, z):
        return self._jet(z, 2)[2]

    def describe(self):
        return {"kind": self.kind, "terms": self.table}


class MinDatum(InitialDatum):
    """u0 = min_i u0_i over smooth pieces; piece_at(z) is a piece attaining the min."""

    is_smooth = False
    kind = "min"

    def __init__(self, pieces):
        pieces = list(pieces)
        if not pieces:
            raise ValueError("⛔ min datum needs at least one piece")
        super().__init__(pieces[0].n)
        self.pieces = pieces

    def piece_at(self, z):
        return self.pieces[int(np.argmin([p.value(z) for p in self.pieces]))]

    def value(self, z):
        return min(p.value(z) for p in self.pieces)

    def gradient(self, z):
        return self.piece_at(z).gradient(z)

    def hessian(self, z):
        return self.piece_at(z).hessian(z)

    def values(self, Z):
        return np.min(np.stack([p.values(Z) for p in self.pieces]), axis=0)

    def describe(self):
        return {"kind": self.kind, "pieces": [p.describe() for p in self.pieces]}
