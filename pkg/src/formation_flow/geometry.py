"""Formation graphs, realizations and distance-geometry checks.

Agent labels are 1-based everywhere in the public API.  Distances are kept
squared; square roots are only taken where a check is genuinely about
lengths (triangle inequalities, congruence).
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._validation import check_int, check_positive
from .exceptions import InfeasibleEmbeddingError, InvalidArgumentError

Edge = tuple[int, int]

K4_EDGES: tuple[Edge, ...] = ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))
K4_FACES: tuple[tuple[int, int, int], ...] = ((1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4))

# relative slack on the non-strict triangle inequality, absorbs sqrt rounding
_TRIANGLE_SLACK = 1e-12


def _normalize_edge(edge) -> Edge:
    try:
        i, j = (int(v) for v in edge)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"edge {edge!r} is not a vertex pair") from exc
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class FormationGraph:
    num_vertices: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        check_int(self.num_vertices, "num_vertices", 1)
        edges = tuple(_normalize_edge(e) for e in self.edges)
        for i, j in edges:
            if not 1 <= i < j <= self.num_vertices:
                raise InvalidArgumentError(
                    f"edge ({i}, {j}) invalid for {self.num_vertices} vertices")
        if len(set(edges)) != len(edges):
            raise InvalidArgumentError("duplicate edges")
        object.__setattr__(self, "edges", edges)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return _normalize_edge((i, j)) in self.edges

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based endpoint arrays, in edge order."""
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2) - 1
        return e[:, 0].copy(), e[:, 1].copy()

    def is_complete(self) -> bool:
        n = self.num_vertices
        return self.num_edges == n * (n - 1) // 2


def complete_graph(n: int) -> FormationGraph:
    n = check_int(n, "n", 2)
    return FormationGraph(n, tuple(itertools.combinations(range(1, n + 1), 2)))


@dataclass(frozen=True)
class DistanceSpec:
    """Desired squared distances on the edges of ``graph``."""

    graph: FormationGraph
    sq_distances: Mapping[Edge, float]
    ambient_dim: int = 2

    def __post_init__(self):
        if self.ambient_dim not in (2, 3):
            raise InvalidArgumentError(f"ambient_dim must be 2 or 3, got {self.ambient_dim!r}")
        sq = {}
        for edge, value in dict(self.sq_distances).items():
            edge = _normalize_edge(edge)
            if edge in sq:
                raise InvalidArgumentError(f"edge {edge} given twice")
            sq[edge] = check_positive(value, f"squared distance on {edge}")
        if set(sq) != set(self.graph.edges):
            missing = set(self.graph.edges) - set(sq)
            extra = set(sq) - set(self.graph.edges)
            raise InvalidArgumentError(
                f"distance keys must match graph edges (missing {sorted(missing)}, extra {sorted(extra)})")
        object.__setattr__(self, "sq_distances", {e: sq[e] for e in self.graph.edges})

    @classmethod
    def from_values(cls, graph: FormationGraph, values: Sequence[float], ambient_dim: int = 2):
        """Build a spec from squared distances listed in ``graph.edges`` order."""
        values = list(values)
        if len(values) != graph.num_edges:
            raise InvalidArgumentError(
                f"expected {graph.num_edges} squared distances, got {len(values)}")
        return cls(graph, dict(zip(graph.edges, values)), ambient_dim)

    @property
    def num_vertices(self) -> int:
        return self.graph.num_vertices

    def sq(self, i: int, j: int) -> float:
        edge = _normalize_edge((i, j))
        try:
            return self.sq_distances[edge]
        except KeyError:
            raise InvalidArgumentError(f"edge {edge} not in spec") from None

    def values(self) -> np.ndarray:
        return np.array([self.sq_distances[e] for e in self.graph.edges], dtype=np.float64)


@dataclass(frozen=True)
class Realization:
    coords: np.ndarray
    dim: int
    num_vertices: int = field(default=-1)

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise InvalidArgumentError(f"dim must be 1, 2 or 3, got {self.dim!r}")
        coords = np.array(self.coords, dtype=np.float64).ravel()
        n = self.num_vertices
        if n == -1:
            if coords.size % self.dim:
                raise InvalidArgumentError("coords length is not a multiple of dim")
            n = coords.size // self.dim
        if coords.size != n * self.dim:
            raise InvalidArgumentError(
                f"coords length {coords.size} != num_vertices*dim = {n * self.dim}")
        if not np.all(np.isfinite(coords)):
            raise InvalidArgumentError("coords must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "num_vertices", n)

    @classmethod
    def from_points(cls, points) -> "Realization":
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2:
            raise InvalidArgumentError("points must be a 2-D array (num_vertices, dim)")
        return cls(pts.ravel(), pts.shape[1], pts.shape[0])

    @property
    def positions(self) -> np.ndarray:
        return self.coords.reshape(self.num_vertices, self.dim)

    def point(self, i: int) -> np.ndarray:
        return self.positions[i - 1]


@dataclass(frozen=True)
class LockedState:
    """Planar positions plus one virtual out-of-plane coordinate.

    The flat state vector is ``[p1x, p1y, ..., pNx, pNy, z]``.
    """

    planar: Realization
    virtual_vertex: int
    virtual_coord: float

    def __post_init__(self):
        if self.planar.dim != 2:
            raise InvalidArgumentError("locked state needs a planar (dim 2) realization")
        if not 1 <= self.virtual_vertex <= self.planar.num_vertices:
            raise InvalidArgumentError(f"virtual_vertex {self.virtual_vertex} out of range")
        if not math.isfinite(self.virtual_coord):
            raise InvalidArgumentError("virtual_coord must be finite")
        object.__setattr__(self, "virtual_coord", float(self.virtual_coord))

    @property
    def num_vertices(self) -> int:
        return self.planar.num_vertices

    @property
    def dof(self) -> int:
        return 2 * self.num_vertices + 1

    def to_vector(self) -> np.ndarray:
        return np.append(self.planar.coords, self.virtual_coord)

    @classmethod
    def from_vector(cls, q, virtual_vertex: int | None = None) -> "LockedState":
        q = np.asarray(q, dtype=np.float64).ravel()
        if q.size < 3 or q.size % 2 != 1:
            raise InvalidArgumentError(f"locked state vector must have odd length 2N+1, got {q.size}")
        n = (q.size - 1) // 2
        return cls(Realization(q[:-1], 2, n), n if virtual_vertex is None else virtual_vertex, q[-1])


def triangle_feasible(spec: DistanceSpec, triple: Sequence[int]) -> bool:
    i, j, k = triple
    a, b, c = (math.sqrt(spec.sq(*e)) for e in ((i, j), (i, k), (j, k)))
    slack = _TRIANGLE_SLACK * max(a, b, c)
    return a + b >= c - slack and a + c >= b - slack and b + c >= a - slack


def _require_k4(spec: DistanceSpec):
    if spec.graph.num_vertices != 4 or not spec.graph.is_complete():
        raise InvalidArgumentError("operation needs a complete four-vertex (K4) spec")


def cayley_menger_matrix(spec: DistanceSpec) -> np.ndarray:
    _require_k4(spec)
    c = np.ones((5, 5))
    c[4, 4] = 0.0
    for i in range(4):
        c[i, i] = 0.0
        for j in range(i + 1, 4):
            c[i, j] = c[j, i] = spec.sq(i + 1, j + 1)
    return c


def cayley_menger_det(spec: DistanceSpec) -> float:
    return float(np.linalg.det(cayley_menger_matrix(spec)))


class Realizability(enum.Enum):
    PLANAR = "PlanarRealizable"
    SPATIAL = "SpatialRealizable"
    INFEASIBLE = "Infeasible"

    def __str__(self):
        return self.value


def cm_tolerance(spec: DistanceSpec, rel_tol: float = 1e-7) -> float:
    # det C scales as length^6 = (squared length)^3
    return rel_tol * max(spec.sq_distances.values()) ** 3


def classify_realizability(spec: DistanceSpec, rel_tol: float = 1e-7) -> Realizability:
    _require_k4(spec)
    if not all(triangle_feasible(spec, face) for face in K4_FACES):
        return Realizability.INFEASIBLE
    det = cayley_menger_det(spec)
    tol = cm_tolerance(spec, rel_tol)
    if abs(det) <= tol:
        return Realizability.PLANAR
    return Realizability.SPATIAL if det > 0 else Realizability.INFEASIBLE


def lift_distances(spec2d: DistanceSpec, alpha: float, virtual_vertex: int = 4) -> DistanceSpec:
    """Tetrahedral targets whose projection realizes ``spec2d``.

    Edges at ``virtual_vertex`` get ``d^2 + alpha^2``; the rest are copied.
    """
    alpha = check_positive(alpha, "alpha")
    if not 1 <= virtual_vertex <= spec2d.num_vertices:
        raise InvalidArgumentError(f"virtual_vertex {virtual_vertex} out of range")
    a2 = alpha * alpha
    lifted = {e: d2 + a2 if virtual_vertex in e else d2 for e, d2 in spec2d.sq_distances.items()}
    return DistanceSpec(spec2d.graph, lifted, ambient_dim=3)


def embed_k4_planar(spec: DistanceSpec, rel_tol: float = 1e-9) -> Realization:
    """Planar coordinates realizing a K4 spec, in a fixed gauge.

    Vertex 1 sits at the origin, vertex 2 on the positive x-axis and vertex 3
    in the upper half-plane (vertex 4 decides when 1, 2, 3 are collinear).
    Coordinates come from the centred Gram matrix (classical MDS), which stays
    accurate when three vertices are collinear, unlike circle intersection.
    """
    _require_k4(spec)
    if classify_realizability(spec) is not Realizability.PLANAR:
        raise InfeasibleEmbeddingError("spec is not planar realizable")
    sq = np.zeros((4, 4))
    for (i, j), d2 in spec.sq_distances.items():
        sq[i - 1, j - 1] = sq[j - 1, i - 1] = d2
    centre = np.eye(4) - 0.25
    w, v = np.linalg.eigh(-0.5 * centre @ sq @ centre)
    pts = v[:, -2:] * np.sqrt(np.maximum(w[-2:], 0.0))
    pts = pts - pts[0]
    c, s = pts[1] / np.linalg.norm(pts[1])
    pts = pts @ np.array([[c, -s], [s, c]])
    pts[0] = 0.0
    pts[1, 1] = 0.0
    flip_on = 2 if abs(pts[2, 1]) > 1e-12 * pts[1, 0] else 3
    if pts[flip_on, 1] < 0:
        pts[:, 1] = -pts[:, 1]
    real = Realization.from_points(pts)
    scale = max(spec.sq_distances.values())
    for (i, j), d2 in spec.sq_distances.items():
        got = float(np.sum((pts[i - 1] - pts[j - 1]) ** 2))
        if abs(got - d2) > rel_tol * scale:
            raise InfeasibleEmbeddingError(
                f"embedding residual on edge ({i}, {j}) is {abs(got - d2):.3g}")
    return real


def lift_locked_to_3d(state: LockedState) -> Realization:
    pts = np.zeros((state.num_vertices, 3))
    pts[:, :2] = state.planar.positions
    pts[state.virtual_vertex - 1, 2] = state.virtual_coord
    return Realization.from_points(pts)


def pairwise_distances(real: Realization) -> np.ndarray:
    pts = real.positions
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def are_congruent(a: Realization, b: Realization, tol: float = 1e-9) -> bool:
    """True iff every pairwise distance agrees within ``tol``.

    All vertex pairs are compared, not only graph edges, so reflections are
    congruent but a moved vertex is not.  Dimensions may differ.
    """
    if a.num_vertices != b.num_vertices:
        raise InvalidArgumentError(
            f"vertex counts differ ({a.num_vertices} vs {b.num_vertices})")
    return bool(np.all(np.abs(pairwise_distances(a) - pairwise_distances(b)) <= tol))
