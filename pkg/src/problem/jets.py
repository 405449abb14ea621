"""
src/problem/jets.py
-------------------

Derivative jets of the Hamiltonian H(t,x,p,u) and Lagrangian L(t,x,v,u).

Both functions are evaluated on the packed variable w = (x, y, u) of size
2n+1, where y is p for H and v for L. A jet stores the value, the packed
gradient and the packed Hessian; the named partials are views into them.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.errors import DomainError


# -------------------------------
# Packed Jet
# -------------------------------
@dataclass(frozen=True)
class Jet:
    """Value plus packed first and second partials in w = (x, y, u)."""

    n: int
    value: float
    grad: Optional[np.ndarray] = None
    hess: Optional[np.ndarray] = None

    @property
    def order(self) -> int:
        if self.hess is not None:
            return 2
        return 1 if self.grad is not None else 0

    def _g(self, sl):
        if self.grad is None:
            raise AttributeError("jet evaluated with order=0 has no first partials")
        return self.grad[sl]

    def _h(self, rows, cols):
        if self.hess is None:
            raise AttributeError("jet evaluated with order<2 has no second partials")
        return self.hess[rows, cols]

    # Blocks shared by both jets
    @property
    def x(self):
        return self._g(slice(0, self.n))

    @property
    def u(self):
        return float(self._g(2 * self.n))

    @property
    def xx(self):
        return self._h(slice(0, self.n), slice(0, self.n))

    @property
    def xu(self):
        return self._h(slice(0, self.n), 2 * self.n)

    @property
    def uu(self):
        return float(self._h(2 * self.n, 2 * self.n))

    def check_finite(self, prefix: str):
        """Raise DomainError naming the first non-finite partial."""
        if not np.isfinite(self.value):
            raise DomainError(f"⛔ non-finite {prefix} value", partial=prefix)
        if self.grad is not None:
            bad = np.flatnonzero(~np.isfinite(self.grad))
            if bad.size:
                name = self._partial_name(prefix, (bad[0],))
                raise DomainError(f"⛔ non-finite partial {name}", partial=name)
        if self.hess is not None:
            bad = np.argwhere(~np.isfinite(self.hess))
            if bad.size:
                name = self._partial_name(prefix, tuple(bad[0]))
                raise DomainError(f"⛔ non-finite partial {name}", partial=name)
        return self

    def _partial_name(self, prefix, index):
        labels = [self._label(i) for i in index]
        return f"{prefix}_{''.join(labels)}"

    def _label(self, i):
        if i < self.n:
            return "x"
        if i < 2 * self.n:
            return self.momentum_label
        return "u"

    momentum_label = "y"


class HamiltonianJet(Jet):
    """Jet of H(t,x,p,u); packed as (x, p, u)."""

    momentum_label = "p"

    @property
    def p(self):
        return self._g(slice(self.n, 2 * self.n))

    @property
    def pp(self):
        return self._h(slice(self.n, 2 * self.n), slice(self.n, 2 * self.n))

    @property
    def px(self):
        # row: p_i, column: x_j
        return self._h(slice(self.n, 2 * self.n), slice(0, self.n))

    @property
    def pu(self):
        return self._h(slice(self.n, 2 * self.n), 2 * self.n)


class LagrangianJet(Jet):
    """Jet of L(t,x,v,u); packed as (x, v, u)."""

    momentum_label = "v"

    @property
    def v(self):
        return self._g(slice(self.n, 2 * self.n))

    @property
    def vv(self):
        return self._h(slice(self.n, 2 * self.n), slice(self.n, 2 * self.n))

    @property
    def xv(self):
        # row: x_i, column: v_j
        return self._h(slice(0, self.n), slice(self.n, 2 * self.n))

    @property
    def vu(self):
        return self._h(slice(self.n, 2 * self.n), 2 * self.n)


# -------------------------------
# Packing helpers
# -------------------------------
def pack(x, y, u) -> np.ndarray:
    return np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)),
                           np.atleast_1d(np.asarray(y, dtype=float)),
                           [float(u)]])


def unpack(w: np.ndarray, n: int):
    return w[:n], w[n:2 * n], float(w[2 * n])


# -------------------------------
# Finite-Difference Jet
# -------------------------------
def finite_difference_jet(func: Callable[[np.ndarray], float], w: np.ndarray, order: int,
                          h_fd: float = 1e-5):
    """
    Central-difference partials of a scalar function of the packed variable.

    First partials use the step h_fd*(1+|w_k|). Second partials use a coarser
    step max(h_fd, 1e-4)*(1+|w_k|) so that round-off stays below the
    truncation error.

    Args:
        func (callable): f(w) -> float
        w (np.ndarray): packed evaluation point
        order (int): 0, 1 or 2
        h_fd (float): relative step

    Returns:
        tuple: (value, grad or None, hess or None)
    """
    w = np.asarray(w, dtype=float)
    value = float(func(w))
    if order == 0:
        return value, None, None

    size = w.size
    steps = h_fd * (1.0 + np.abs(w))
    grad = np.empty(size)
    for k in range(size):
        e = np.zeros(size)
        e[k] = steps[k]
        grad[k] = (func(w + e) - func(w - e)) / (2.0 * steps[k])
    if order == 1:
        return value, grad, None

    steps2 = max(h_fd, 1e-4) * (1.0 + np.abs(w))
    hess = np.empty((size, size))
    for i in range(size):
        ei = np.zeros(size)
        ei[i] = steps2[i]
        hess[i, i] = (func(w + ei) - 2.0 * value + func(w - ei)) / steps2[i] ** 2
        for j in range(i + 1, size):
            ej = np.zeros(size)
            ej[j] = steps2[j]
            mixed = (func(w + ei + ej) - func(w + ei - ej)
                     - func(w - ei + ej) + func(w - ei - ej)) / (4.0 * steps2[i] * steps2[j])
            hess[i, j] = hess[j, i] = mixed
    return value, grad, hess
