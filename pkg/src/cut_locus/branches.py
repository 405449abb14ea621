"""
src/cut_locus/branches.py
-------------------------

Local smooth solution sheets v_i near a non-conjugate point.

Each sheet follows one root z_i(t,x) of X(t;z) = x:
    v_i = U(t; z_i),  p_i = P(t; z_i),  q_i = -H(t, x, p_i, v_i)
"""

import copy
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.bolza.shooting import ShootingOptions, newton_root
from src.cut_locus.classify import Classification, Kind
from src.errors import PreconditionError, ShootingError
from src.problem.spec import ProblemSpec, hamiltonian_jet

logger = logging.getLogger(__name__)


@dataclass
class Branch:
    index: int
    seed: np.ndarray
    t: float
    x: np.ndarray
    value: float
    q: float
    p: np.ndarray
    det_Xz: float

    @property
    def gradient(self) -> np.ndarray:
        """Space-time gradient (q, p)."""
        return np.concatenate([[self.q], self.p])


class BranchList(list):
    """Accepted branches; rejected ones are kept as (seed, reason) pairs."""

    def __init__(self, branches=(), rejected=None):
        super().__init__(branches)
        self.rejected = list(rejected or [])


def _make_branch(spec, index, t, x, entry) -> Branch:
    p = np.atleast_1d(entry.P)
    q = -hamiltonian_jet(spec, t, x, p, entry.U, order=0).value
    return Branch(index, entry.seed.copy(), float(t), np.atleast_1d(x).copy(), float(entry.U), float(q), p.copy(),
                  float(entry.det_Xz))


def local_branches(spec: ProblemSpec, t: float, x, classification: Classification,
                   options: ShootingOptions = None, tol_conj: float = None) -> BranchList:
    """
    One Branch per minimizing seed of a Regular or IrregularOnly point.

    Raises:
        PreconditionError: the point lies on the conjugate locus or is Unknown
    """
    if classification.kind not in (Kind.REGULAR, Kind.IRREGULAR_ONLY):
        raise PreconditionError(f"⛔ local branches need a point off the conjugate locus, got "
                                f"{classification.kind.value}", hypothesis="not conjugate")
    options = options or classification.tolerances.shooting
    tol_conj = classification.tolerances.tol_conj if tol_conj is None else tol_conj
    x = np.atleast_1d(np.asarray(x, dtype=float))

    accepted, rejected = [], []
    for entry in classification.minimizers.minimizing:
        piece = spec.with_datum(spec.initial_datum.piece_at(entry.seed))
        root = newton_root(piece, t, x, entry.seed, options)
        if root is None:
            rejected.append((entry.seed.tolist(), "newton"))
            logger.warning(f"⚠️ Branch at seed {entry.seed.tolist()} rejected: Newton failed")
            continue
        if abs(root.det_Xz) <= tol_conj:
            rejected.append((entry.seed.tolist(), "conjugate"))
            logger.warning(f"⚠️ Branch at seed {entry.seed.tolist()} rejected: |det X_z| <= tol_conj")
            continue
        accepted.append(_make_branch(piece, len(accepted), t, x, root))
    return BranchList(accepted, rejected)


# -------------------------------
# Sheets
# -------------------------------
class BranchSheet:
    """
    A branch followed in (t, x) by warm-started Newton continuation on its seed.

    The sheet keeps the smooth datum piece active at its seed.
    """

    def __init__(self, spec: ProblemSpec, seed, index: int = 0, options: ShootingOptions = None):
        self.seed = np.atleast_1d(np.asarray(seed, dtype=float)).copy()
        self.spec = spec.with_datum(spec.initial_datum.piece_at(self.seed))
        self.index = index
        self.options = options or ShootingOptions()

    @classmethod
    def from_branches(cls, spec: ProblemSpec, branches, options: ShootingOptions = None) -> list:
        return [cls(spec, b.seed, b.index, options) for b in branches]

    def copy(self) -> "BranchSheet":
        return copy.copy(self)

    def evaluate(self, t: float, x) -> Branch:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        root = newton_root(self.spec, t, x, self.seed, self.options)
        if root is None:
            raise ShootingError(f"⛔ sheet {self.index} lost its root at t={t}, x={x.tolist()}")
        self.seed = root.seed
        return _make_branch(self.spec, self.index, t, x, root)


class AnalyticSheet:
    """A closed-form sheet: value(t, x) and gradient(t, x) -> (q, p)."""

    def __init__(self, index: int, value: Callable, gradient: Callable, det: Optional[Callable] = None):
        self.index = index
        self._value = value
        self._gradient = gradient
        self._det = det

    def copy(self) -> "AnalyticSheet":
        return self

    def evaluate(self, t: float, x) -> Branch:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        q, p = self._gradient(t, x)
        det = 1.0 if self._det is None else float(self._det(t, x))
        return Branch(self.index, np.full(x.size, np.nan), float(t), x.copy(), float(self._value(t, x)),
                      float(q), np.atleast_1d(np.asarray(p, dtype=float)), det)
