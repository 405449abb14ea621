"""
src/singular/faces.py
---------------------

Faces of the reachable superdifferential D#u(t,x) = co{Dv_i(t,x)}.

Vertices are space-time gradients Dv_i = (q_i, p_i) in R^{n+1}. A face keeps
the full ambient vertex list and the indices of its active vertices.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.errors import GeometricDependenceError, PreconditionError

logger = logging.getLogger(__name__)


@dataclass
class FaceSelection:
    """
    Attributes:
        vertices (np.ndarray): ambient gradients, shape (k, n+1)
        active (tuple): indices of the face vertices, in ambient order
        theta (np.ndarray): exposing direction, None for a face given by hand
        slack (float): min over inactive j of <Dv_j, theta> - min_i <Dv_i, theta>; inf with no inactive vertex
    """

    vertices: np.ndarray
    active: tuple
    theta: Optional[np.ndarray] = None
    slack: float = float("inf")

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        self.active = tuple(sorted(int(i) for i in self.active))
        if not self.active:
            raise PreconditionError("⛔ a face needs at least one active vertex", hypothesis="k' >= 1")

    @classmethod
    def whole(cls, vertices) -> "FaceSelection":
        vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        return cls(vertices, tuple(range(vertices.shape[0])))

    @property
    def k_prime(self) -> int:
        return len(self.active)

    @property
    def active_vertices(self) -> np.ndarray:
        return self.vertices[list(self.active)]

    @property
    def inactive(self) -> tuple:
        return tuple(i for i in range(self.vertices.shape[0]) if i not in self.active)

    def rank_margin(self) -> float:
        return independence_margin(self.active_vertices)

    def require_independent(self, tol_rank: float = 1e-8):
        margin = self.rank_margin()
        if margin <= tol_rank:
            raise GeometricDependenceError(
                f"⛔ face {list(self.active)} is geometrically dependent (rank margin {margin:.3e})")
        return margin


def independence_margin(points) -> float:
    """
    Smallest singular value of the differences Dv_i - Dv_k'.

    The points are geometrically independent iff it is positive; a single
    point is independent with margin inf.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 1:
        return float("inf")
    diffs = (points[:-1] - points[-1]).T
    if diffs.shape[1] > diffs.shape[0]:
        return 0.0
    return float(np.linalg.svd(diffs, compute_uv=False)[-1])


def exposed_face(vertices, theta, face_tol: float = 1e-9) -> FaceSelection:
    """
    Exposed face {y in K : <z - y, theta> >= 0 for all z in K}, i.e. the vertices
    minimizing <., theta> within face_tol.

    Raises:
        PreconditionError: theta = 0 or no vertices
    """
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    theta = np.asarray(theta, dtype=float)
    if vertices.size == 0:
        raise PreconditionError("⛔ exposed face of an empty set", hypothesis="vertices nonempty")
    if not np.any(theta):
        raise PreconditionError("⛔ exposing direction must be nonzero", hypothesis="theta != 0")
    support = vertices @ theta
    lowest = float(support.min())
    active = np.flatnonzero(support <= lowest + face_tol)
    rest = support[support > lowest + face_tol]
    slack = float(rest.min() - lowest) if rest.size else float("inf")
    return FaceSelection(vertices, tuple(active), theta.copy(), slack)
