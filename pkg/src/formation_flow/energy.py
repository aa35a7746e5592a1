"""Distance-error potentials, their gradients and Hessians.

Every potential here has the form ``1/4 * sum_edges e_ij**2`` with
``e_ij = |x_i - x_j|**2 - D_ij**2``.  The locked system is handled by lifting
its state to 3-D (virtual vertex raised by the extra coordinate, all others
at z = 0) and restricting derivatives to the 2N + 1 free coordinates, so the
locked and plain 3-D potentials share one code path.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._validation import check_vector
from .exceptions import InvalidArgumentError
from .geometry import DistanceSpec, Edge, LockedState, Realization


class Mode(enum.Enum):
    PLAIN = "plain"
    LOCKED = "locked"


@dataclass(frozen=True)
class EdgeError:
    edge: Edge
    value: float


@dataclass(frozen=True)
class EnergySystem:
    """A target spec paired with the state layout it acts on.

    ``PLAIN`` states are ``N * spec.ambient_dim`` long.  ``LOCKED`` states are
    ``2N + 1`` long and need a 3-D (lifted) spec; ``alpha`` optionally records
    the lift height, used as the default initial virtual coordinate.
    """

    spec: DistanceSpec
    mode: Mode = Mode.PLAIN
    virtual_vertex: int | None = None
    alpha: float | None = None

    def __post_init__(self):
        mode = Mode(self.mode)
        object.__setattr__(self, "mode", mode)
        if mode is Mode.LOCKED:
            if self.spec.ambient_dim != 3:
                raise InvalidArgumentError("locked mode needs lifted (ambient_dim 3) targets")
            vv = self.spec.num_vertices if self.virtual_vertex is None else int(self.virtual_vertex)
            if not 1 <= vv <= self.spec.num_vertices:
                raise InvalidArgumentError(f"virtual_vertex {vv} out of range")
            object.__setattr__(self, "virtual_vertex", vv)
        elif self.virtual_vertex is not None:
            raise InvalidArgumentError("virtual_vertex is only meaningful in locked mode")

    @classmethod
    def plain(cls, spec: DistanceSpec) -> "EnergySystem":
        return cls(spec, Mode.PLAIN)

    @classmethod
    def locked(cls, spec3d: DistanceSpec, virtual_vertex: int | None = None,
               alpha: float | None = None) -> "EnergySystem":
        return cls(spec3d, Mode.LOCKED, virtual_vertex, alpha)

    @property
    def num_vertices(self) -> int:
        return self.spec.num_vertices

    @property
    def is_locked(self) -> bool:
        return self.mode is Mode.LOCKED

    @property
    def dim(self) -> int:
        """Dimension of the space the agents physically move in."""
        return 2 if self.is_locked else self.spec.ambient_dim

    @property
    def lifted_dim(self) -> int:
        return 3 if self.is_locked else self.spec.ambient_dim

    @property
    def state_size(self) -> int:
        n = self.num_vertices
        return 2 * n + 1 if self.is_locked else n * self.spec.ambient_dim

    @cached_property
    def _arrays(self):
        i, j = self.spec.graph.index_arrays()
        return i, j, self.spec.values()

    @cached_property
    def free_indices(self) -> np.ndarray:
        """Positions of the state coordinates inside the flattened lift."""
        n = self.num_vertices
        if not self.is_locked:
            return np.arange(n * self.lifted_dim)
        planar = (3 * np.arange(n)[:, None] + np.arange(2)).ravel()
        return np.append(planar, 3 * (self.virtual_vertex - 1) + 2)

    def check_state(self, x) -> np.ndarray:
        return check_vector(x, self.state_size)

    def lift(self, x) -> np.ndarray:
        """State -> (N, lifted_dim) array of positions."""
        x = self.check_state(x)
        if not self.is_locked:
            return x.reshape(self.num_vertices, self.lifted_dim)
        pts = np.zeros((self.num_vertices, 3))
        pts[:, :2] = x[:-1].reshape(-1, 2)
        pts[self.virtual_vertex - 1, 2] = x[-1]
        return pts

    def positions(self, x) -> np.ndarray:
        """Physical agent positions (the planar part in locked mode)."""
        pts = self.lift(x)
        return pts[:, :2] if self.is_locked else pts

    def to_locked_state(self, x) -> LockedState:
        if not self.is_locked:
            raise InvalidArgumentError("not a locked system")
        return LockedState.from_vector(self.check_state(x), self.virtual_vertex)

    def to_realization(self, x) -> Realization:
        """The (lifted, for locked mode) realization the potential sees."""
        return Realization.from_points(self.lift(x))


def _differences(sys: EnergySystem, x):
    pts = sys.lift(x)
    i, j, d2 = sys._arrays
    r = pts[i] - pts[j]
    return pts, r, np.sum(r * r, axis=1) - d2


def edge_error_values(sys: EnergySystem, x) -> np.ndarray:
    return _differences(sys, x)[2]


def edge_errors(sys: EnergySystem, x) -> list[EdgeError]:
    e = edge_error_values(sys, x)
    return [EdgeError(edge, float(v)) for edge, v in zip(sys.spec.graph.edges, e)]


def planar_errors(sys: EnergySystem, x) -> np.ndarray:
    """Errors of the physical positions against the planar targets.

    For a locked system the planar target on an edge at the virtual vertex is
    the lifted target minus ``alpha**2``, so this needs ``sys.alpha``.
    """
    pos = sys.positions(x)
    i, j, d2 = sys._arrays
    r = pos[i] - pos[j]
    target = d2
    if sys.is_locked:
        if sys.alpha is None:
            raise InvalidArgumentError("planar errors of a locked system need alpha")
        at_virtual = (i == sys.virtual_vertex - 1) | (j == sys.virtual_vertex - 1)
        target = d2 - np.where(at_virtual, sys.alpha ** 2, 0.0)
    return np.sum(r * r, axis=1) - target


def potential(sys: EnergySystem, x) -> float:
    e = edge_error_values(sys, x)
    return float(0.25 * np.dot(e, e))


def _lifted_gradient(sys, x):
    pts, r, e = _differences(sys, x)
    i, j, _ = sys._arrays
    force = e[:, None] * r
    g = np.zeros_like(pts)
    np.add.at(g, i, force)
    np.add.at(g, j, -force)
    return g


def gradient(sys: EnergySystem, x) -> np.ndarray:
    """Exact gradient; the control law is its negative."""
    return _lifted_gradient(sys, x).ravel()[sys.free_indices]


def lifted_gradient(sys: EnergySystem, x) -> np.ndarray:
    """Gradient of the full lifted potential (all N * lifted_dim coordinates)."""
    return _lifted_gradient(sys, x).ravel()


def lifted_hessian(sys: EnergySystem, x) -> np.ndarray:
    """Hessian of the lifted potential over all N * lifted_dim coordinates."""
    pts, r, e = _differences(sys, x)
    i, j, _ = sys._arrays
    n, d = pts.shape
    # per edge: d^2/dr^2 of e^2/4 = e*I + 2 r r^T
    blocks = e[:, None, None] * np.eye(d) + 2.0 * r[:, :, None] * r[:, None, :]
    h = np.zeros((n, d, n, d))
    for k in range(len(e)):
        a, b, blk = i[k], j[k], blocks[k]
        h[a, :, a, :] += blk
        h[b, :, b, :] += blk
        h[a, :, b, :] -= blk
        h[b, :, a, :] -= blk
    h = h.reshape(n * d, n * d)
    return 0.5 * (h + h.T)


def hessian(sys: EnergySystem, x) -> np.ndarray:
    idx = sys.free_indices
    return lifted_hessian(sys, x)[np.ix_(idx, idx)]


def hessian_fd(sys: EnergySystem, x, h: float = 1e-5) -> np.ndarray:
    """Central differences of the analytic gradient, symmetrized."""
    x = sys.check_state(x)
    n = x.size
    out = np.empty((n, n))
    for k in range(n):
        step = h * (1.0 + abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += step
        xm[k] -= step
        out[:, k] = (gradient(sys, xp) - gradient(sys, xm)) / (2.0 * step)
    return 0.5 * (out + out.T)


def null_tolerance(eigenvalues, rel_tol: float = 1e-6) -> float:
    eigenvalues = np.asarray(eigenvalues)
    return rel_tol * float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0


def count_null(eigenvalues, rel_tol: float = 1e-6) -> int:
    eigenvalues = np.asarray(eigenvalues)
    return int(np.sum(np.abs(eigenvalues) <= null_tolerance(eigenvalues, rel_tol)))
