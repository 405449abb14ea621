"""
src/problem/hamiltonians.py
---------------------------

Hamiltonian and Lagrangian families.

Built-in families:
- QuadraticHamiltonian / QuadraticLagrangian: H = |p|^2/2 + lam*u, L = |v|^2/2 - lam*u
  (lam = 0 is the classical case).
- PolynomialHamiltonian / PolynomialLagrangian: coefficient tables in (x, y, u)
  with time-dependent scalar coefficients, exactly differentiable.
- LegendreLagrangian: L obtained from any strictly convex H by the Legendre
  transform, for custom Hamiltonians supplied without a Lagrangian table.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.problem.jets import finite_difference_jet, pack, unpack

logger = logging.getLogger(__name__)


# -------------------------------
# Base Classes
# -------------------------------
class _PackedFunction:
    """Scalar function of (t, x, y, u) with optional closed-form partials."""

    has_closed_form = False

    def __init__(self, n: int):
        self.n = int(n)

    def value(self, t, x, y, u) -> float:
        raise NotImplementedError

    def closed_form(self, t, w, order):
        raise NotImplementedError

    def packed(self, t, w, order, mode="closed_form", h_fd=1e-5):
        """Return (value, grad, hess) in packed coordinates."""
        if mode == "closed_form" and self.has_closed_form:
            return self.closed_form(t, w, order)
        n = self.n
        return finite_difference_jet(lambda ww: self.value(t, *unpack(ww, n)), w, order, h_fd)


class Hamiltonian(_PackedFunction):
    """H(t, x, p, u), strictly convex in p."""

    time_dependent = True

    def batch(self, t, X, P, U):
        """
        Evaluate H, H_p and H_u on many points at once.

        Args:
            t (float): time
            X, P (np.ndarray): arrays of shape (N, n)
            U (np.ndarray): array of shape (N,)

        Returns:
            tuple: (H (N,), H_p (N, n), H_u (N,))
        """
        N = X.shape[0]
        values = np.empty(N)
        H_p = np.empty((N, self.n))
        H_u = np.empty(N)
        for i in range(N):
            val, grad, _ = self.packed(t, pack(X[i], P[i], U[i]), 1)
            values[i] = val
            H_p[i] = grad[self.n:2 * self.n]
            H_u[i] = grad[2 * self.n]
        return values, H_p, H_u


class Lagrangian(_PackedFunction):
    """L(t, x, v, u), the Legendre dual of a Hamiltonian."""


# -------------------------------
# Quadratic (classical / discounted) Family
# -------------------------------
class QuadraticHamiltonian(Hamiltonian):
    """H = |p|^2/2 + discount*u."""

    has_closed_form = True
    time_dependent = False

    def __init__(self, n: int, discount: float = 0.0):
        super().__init__(n)
        self.discount = float(discount)

    def value(self, t, x, p, u):
        p = np.atleast_1d(p)
        return 0.5 * float(p @ p) + self.discount * float(u)

    def closed_form(self, t, w, order):
        n = self.n
        p = w[n:2 * n]
        value = 0.5 * float(p @ p) + self.discount * float(w[2 * n])
        if order == 0:
            return value, None, None
        grad = np.zeros(2 * n + 1)
        grad[n:2 * n] = p
        grad[2 * n] = self.discount
        if order == 1:
            return value, grad, None
        hess = np.zeros((2 * n + 1, 2 * n + 1))
        hess[n:2 * n, n:2 * n] = np.eye(n)
        return value, grad, hess

    def batch(self, t, X, P, U):
        values = 0.5 * np.sum(P * P, axis=1) + self.discount * U
        return values, P.copy(), np.full(U.shape, self.discount)


class QuadraticLagrangian(Lagrangian):
    """L = |v|^2/2 - discount*u."""

    has_closed_form = True

    def __init__(self, n: int, discount: float = 0.0):
        super().__init__(n)
        self.discount = float(discount)

    def value(self, t, x, v, u):
        v = np.atleast_1d(v)
        return 0.5 * float(v @ v) - self.discount * float(u)

    def closed_form(self, t, w, order):
        n = self.n
        v = w[n:2 * n]
        value = 0.5 * float(v @ v) - self.discount * float(w[2 * n])
        if order == 0:
            return value, None, None
        grad = np.zeros(2 * n + 1)
        grad[n:2 * n] = v
        grad[2 * n] = -self.discount
        if order == 1:
            return value, grad, None
        hess = np.zeros((2 * n + 1, 2 * n + 1))
        hess[n:2 * n, n:2 * n] = np.eye(n)
        return value, grad, hess


# -------------------------------
# Polynomial Tables
# -------------------------------
@dataclass(frozen=True)
class PolynomialTerm:
    """coef(t) * prod(w_k ** exponents_k), coef(t) = sum_j time_coefs[j] * t**j."""

    time_coefs: tuple
    exponents: tuple

    def coefficient(self, t: float) -> float:
        return float(np.polynomial.polynomial.polyval(t, self.time_coefs))


def parse_terms(table: Sequence[dict], n: int) -> list:
    """
    Build PolynomialTerm objects from a config table.

    Each row: {"coef": [c0, c1, ...], "x": [..n ints], "y": [..n ints], "u": int}.
    Missing exponent blocks default to zero.
    """
    terms = []
    for row in table:
        coefs = row.get("coef", [1.0])
        if np.isscalar(coefs):
            coefs = [coefs]
        ex = list(row.get("x", [0] * n))
        ey = list(row.get("y", row.get("p", row.get("v", [0] * n))))
        eu = int(row.get("u", 0))
        if len(ex) != n or len(ey) != n:
            raise ValueError(f"⛔ polynomial term exponents must have length {n}: {row}")
        exps = tuple(int(e) for e in ex + ey + [eu])
        if any(e < 0 for e in exps):
            raise ValueError(f"⛔ negative exponent in polynomial term: {row}")
        terms.append(PolynomialTerm(tuple(float(c) for c in coefs), exps))
    return terms


def _monomial_jet(w, exps, order):
    e = np.asarray(exps)
    size = w.size
    powers = np.array([w[k] ** e[k] for k in range(size)])
    value = float(np.prod(powers))
    if order == 0:
        return value, None, None

    def prod_except(skip):
        return float(np.prod([powers[k] for k in range(size) if k not in skip]))

    grad = np.zeros(size)
    for k in range(size):
        if e[k] > 0:
            grad[k] = e[k] * w[k] ** (e[k] - 1) * prod_except({k})
    if order == 1:
        return value, grad, None
    hess = np.zeros((size, size))
    for k in range(size):
        if e[k] > 1:
            hess[k, k] = e[k] * (e[k] - 1) * w[k] ** (e[k] - 2) * prod_except({k})
        for j in range(k + 1, size):
            if e[k] > 0 and e[j] > 0:
                val = (e[k] * w[k] ** (e[k] - 1) * e[j] * w[j] ** (e[j] - 1)
                       * prod_except({k, j}))
                hess[k, j] = hess[j, k] = val
    return value, grad, hess


class _PolynomialMixin:
    has_closed_form = True

    def _init_terms(self, table):
        self.terms = parse_terms(table, self.n) if table and isinstance(table[0], dict) else list(table)

    def value(self, t, x, y, u):
        return self.closed_form(t, pack(x, y, u), 0)[0]

    def closed_form(self, t, w, order):
        size = 2 * self.n + 1
        value = 0.0
        grad = np.zeros(size) if order >= 1 else None
        hess = np.zeros((size, size)) if order >= 2 else None
        for term in self.terms:
            c = term.coefficient(t)
            if c == 0.0:
                continue
            v, g, h = _monomial_jet(w, term.exponents, order)
            value += c * v
            if grad is not None:
                grad += c * g
            if hess is not None:
                hess += c * h
        return value, grad, hess


class PolynomialHamiltonian(_PolynomialMixin, Hamiltonian):
    """Custom H given as a coefficient table in (x, p, u)."""

    def __init__(self, n: int, table):
        Hamiltonian.__init__(self, n)
        self._init_terms(table)
        self.time_dependent = any(len(term.time_coefs) > 1 for term in self.terms)

    def batch(self, t, X, P, U):
        W = np.hstack([X, P, U[:, None]])
        n = self.n
        values = np.zeros(W.shape[0])
        grad = np.zeros_like(W)
        for term in self.terms:
            c = term.coefficient(t)
            e = np.asarray(term.exponents)
            values += c * np.prod(W ** e, axis=1)
            for k in range(n, 2 * n + 1):
                if e[k] == 0:
                    continue
                ek = e.copy()
                ek[k] -= 1
                grad[:, k] += c * e[k] * np.prod(W ** ek, axis=1)
        return values, grad[:, n:2 * n], grad[:, 2 * n]


class PolynomialLagrangian(_PolynomialMixin, Lagrangian):
    """Custom L given as a coefficient table in (x, v, u)."""

    def __init__(self, n: int, table):
        Lagrangian.__init__(self, n)
        self._init_terms(table)


# -------------------------------
# Legendre Transform Lagrangian
# -------------------------------
class LegendreLagrangian(Lagrangian):
    """
    L(t,x,v,u) = sup_p { p.v - H(t,x,p,u) } for a strictly convex H.

    The maximiser p* solves H_p(t,x,p,u) = v (Newton). First partials follow
    from the envelope identities L_v = p*, L_x = -H_x, L_u = -H_u; second
    partials are central differences of the first.
    """

    has_closed_form = True

    def __init__(self, hamiltonian: Hamiltonian, max_iter: int = 50, tol: float = 1e-13):
        super().__init__(hamiltonian.n)
        self.hamiltonian = hamiltonian
        self.max_iter = max_iter
        self.tol = tol

    def momentum(self, t, x, v, u):
        n = self.n
        v = np.atleast_1d(np.asarray(v, dtype=float))
        p = v.copy()
        for _ in range(self.max_iter):
            _, grad, hess = self.hamiltonian.packed(t, pack(x, p, u), 2)
            residual = grad[n:2 * n] - v
            if np.max(np.abs(residual)) <= self.tol * (1.0 + np.max(np.abs(v))):
                break
            p = p - np.linalg.solve(hess[n:2 * n, n:2 * n], residual)
        return p

    def _first(self, t, w):
        n = self.n
        x, v, u = unpack(w, n)
        p = self.momentum(t, x, v, u)
        H, grad, _ = self.hamiltonian.packed(t, pack(x, p, u), 1)
        value = float(p @ v) - H
        out = np.empty(2 * n + 1)
        out[:n] = -grad[:n]
        out[n:2 * n] = p
        out[2 * n] = -grad[2 * n]
        return value, out

    def value(self, t, x, v, u):
        return self._first(t, pack(x, v, u))[0]

    def closed_form(self, t, w, order):
        value, grad = self._first(t, w)
        if order == 0:
            return value, None, None
        if order == 1:
            return value, grad, None
        size = w.size
        hess = np.empty((size, size))
        steps = 1e-5 * (1.0 + np.abs(w))
        for k in range(size):
            e = np.zeros(size)
            e[k] = steps[k]
            hess[:, k] = (self._first(t, w + e)[1] - self._first(t, w - e)[1]) / (2.0 * steps[k])
        return value, grad, 0.5 * (hess + hess.T)
