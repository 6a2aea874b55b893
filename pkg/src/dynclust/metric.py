"""Finite metric spaces with the normalization used throughout the package.

Distances are float64 and the minimum nonzero distance is scaled to 1, so
the aspect ratio delta equals the largest pairwise distance.  Duplicate
points are kept (their distance is 0 and they do not participate in the
normalization).  Dense n x n storage only; construction refuses n > 5000.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

MAX_POINTS = 5000
DIST_TOL = 1e-9


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricSpace:
    """Normalized finite metric: symmetric, zero diagonal, min nonzero = 1."""

    dist: np.ndarray

    def __post_init__(self):
        d = self.dist
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise MetricError("distance matrix must be square")
        if d.shape[0] > MAX_POINTS:
            raise MetricError(f"refusing {d.shape[0]} points; dense storage is capped at {MAX_POINTS}")

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def delta(self) -> float:
        """Aspect ratio: the largest pairwise distance (>= 1 for n >= 2 distinct)."""
        return float(self.dist.max())

    def ball(self, center: int, radius: float, universe=None) -> np.ndarray:
        """Indices within radius of center, inclusive up to tolerance 1e-9.

        With a universe given, only those indices are considered and the
        result is a subset of it.
        """
        if universe is None:
            return np.flatnonzero(self.dist[center] <= radius + DIST_TOL)
        universe = np.asarray(universe, dtype=int)
        return universe[self.dist[center, universe] <= radius + DIST_TOL]

    def validate(self) -> None:
        d = self.dist
        n = d.shape[0]
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise MetricError("distance matrix must be square")
        if n > MAX_POINTS:
            raise MetricError(f"refusing {n} points; dense storage is capped at {MAX_POINTS}")
        if not np.allclose(np.diag(d), 0.0, atol=DIST_TOL):
            raise MetricError("nonzero diagonal")
        if not np.allclose(d, d.T, atol=DIST_TOL):
            raise MetricError("asymmetric distances")
        if (d < -DIST_TOL).any():
            raise MetricError("negative distance")
        nz = d[d > DIST_TOL]
        if nz.size and abs(nz.min() - 1.0) > 1e-6:
            raise MetricError(f"min nonzero distance is {nz.min()}, expected 1 after normalization")
        # Triangle inequality. Full O(n^3) scan for moderate n, deterministic
        # sampled pivots beyond that (construction from feature rows satisfies
        # it exactly anyway).
        if n <= 1024:
            pivots = range(n)
        else:
            pivots = np.random.default_rng(0).choice(n, size=256, replace=False)
        for k in pivots:
            if (d > d[:, k][:, None] + d[k, :][None, :] + 1e-7 * (1.0 + d)).any():
                raise MetricError(f"triangle inequality fails through point {k}")


def normalize_distances(d: np.ndarray) -> np.ndarray:
    """Scale so the minimum nonzero distance is 1. No nonzero distance: error."""
    d = np.asarray(d, dtype=np.float64)
    nz = d[d > DIST_TOL]
    if nz.size == 0:
        raise MetricError("all distances are zero; need at least 2 distinct points")
    return d / nz.min()


def from_distance_matrix(d, normalize: bool = True, validate: bool = True) -> MetricSpace:
    d = np.asarray(d, dtype=np.float64)
    if normalize:
        d = normalize_distances(d)
    ms = MetricSpace(d)
    if validate:
        ms.validate()
    return ms


def from_feature_rows(rows) -> MetricSpace:
    """Euclidean distances between feature rows, then normalization.

    Requires at least 2 distinct rows (otherwise there is no nonzero distance
    to normalize by). Duplicate rows are kept as distance-0 pairs.
    """
    try:
        X = np.asarray(rows, dtype=np.float64)
    except ValueError as e:
        raise MetricError(f"rows do not form a rectangular numeric array: {e}") from None
    if X.ndim != 2 or X.shape[0] < 2:
        raise MetricError("need a 2-d array with at least 2 rows")
    if X.shape[0] > MAX_POINTS:
        raise MetricError(f"refusing {X.shape[0]} points; capped at {MAX_POINTS}")
    sq = (X**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    d = np.sqrt(d2)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return from_distance_matrix(d, normalize=True, validate=True)


def load_points_csv(path) -> np.ndarray:
    """Read numeric feature rows from a CSV file.

    The first row is skipped when any of its cells fails to parse as a number
    (header auto-detection).  Columns that are non-numeric in any remaining
    row are dropped with a warning.
    """
    with open(path, newline="") as fh:
        raw = [row for row in csv.reader(fh) if row]
    if not raw:
        raise MetricError(f"{path}: empty CSV")

    def numeric(cell: str) -> bool:
        try:
            float(cell)
            return True
        except ValueError:
            return False

    if not all(numeric(c) for c in raw[0]):
        raw = raw[1:]
        if not raw:
            raise MetricError(f"{path}: CSV has only a header row")
    ncol = max(len(r) for r in raw)
    keep = []
    for j in range(ncol):
        if all(j < len(r) and numeric(r[j]) for r in raw):
            keep.append(j)
        else:
            warnings.warn(f"{path}: dropping non-numeric column {j}")
    if not keep:
        raise MetricError(f"{path}: no numeric columns")
    return np.array([[float(r[j]) for j in keep] for r in raw], dtype=np.float64)


@dataclass(frozen=True)
class PointRole:
    """Which points may host facilities, and at what opening cost.

    facilities: sorted candidate-center indices into the metric.
    opening_cost: aligned costs (zeros for k-center / k-median).
    For the standard problems the candidate set is all of M; lower-bound
    constructions restrict it explicitly.
    """

    facilities: np.ndarray
    opening_cost: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.facilities, dtype=int)
        c = np.asarray(self.opening_cost, dtype=float)
        if f.ndim != 1 or c.shape != f.shape:
            raise MetricError("facilities and opening_cost must be aligned 1-d arrays")
        if (np.diff(f) <= 0).any():
            raise MetricError("facility indices must be strictly increasing")
        if (c < 0).any():
            raise MetricError("negative opening cost")
        object.__setattr__(self, "facilities", f)
        object.__setattr__(self, "opening_cost", c)

    @staticmethod
    def all_of(ms: MetricSpace, opening_cost=None) -> "PointRole":
        f = np.arange(ms.n)
        c = np.zeros(ms.n) if opening_cost is None else np.asarray(opening_cost, dtype=float)
        return PointRole(f, c)


@dataclass(frozen=True)
class HST:
    """Uniform binary hierarchy over 2**height leaves with geometric edge costs.

    Nodes are heap-indexed (root 0, children of v are 2v+1 and 2v+2); the
    edge from a node at depth d+1 up to its parent costs (4c)**(height-d-1),
    so leaf-to-parent edges cost 1 and the space needs no renormalization.
    The metric covers all nodes; lower-bound instances restrict facilities
    to the leaves via PointRole.
    """

    height: int
    c: float
    space: MetricSpace = field(repr=False)
    depth: np.ndarray = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return 2 ** (self.height + 1) - 1

    @property
    def leaves(self) -> np.ndarray:
        return np.arange(2**self.height - 1, self.num_nodes)

    def children(self, v: int) -> tuple[int, int]:
        return 2 * v + 1, 2 * v + 2

    def is_leaf(self, v: int) -> bool:
        return 2 * v + 1 >= self.num_nodes

    def subtree_nodes(self, v: int) -> np.ndarray:
        out = []
        stack = [v]
        while stack:
            u = stack.pop()
            out.append(u)
            if not self.is_leaf(u):
                stack.extend(self.children(u))
        return np.array(sorted(out))

    def leftmost_leaf(self, v: int) -> int:
        while not self.is_leaf(v):
            v = 2 * v + 1
        return v

    def rightmost_leaf(self, v: int) -> int:
        while not self.is_leaf(v):
            v = 2 * v + 2
        return v

    def path_cost_sum(self, levels: int) -> float:
        """2 * sum_{k<levels} (4c)^k: distance between two leaves whose
        lowest common ancestor sits `levels` above them."""
        base = 4.0 * self.c
        return 2.0 * sum(base**k for k in range(levels))


def build_hst(height: int, c: float) -> HST:
    """Build the hierarchy and its all-node metric. height >= 1, 4c > 1."""
    if height < 1:
        raise MetricError("height must be >= 1")
    if 4.0 * c <= 1.0:
        raise MetricError("need 4c > 1 for geometrically increasing edge costs")
    n = 2 ** (height + 1) - 1
    if n > MAX_POINTS:
        raise MetricError(f"height {height} gives {n} nodes; capped at {MAX_POINTS}")
    depth = np.zeros(n, dtype=int)
    for v in range(1, n):
        depth[v] = depth[(v - 1) // 2] + 1
    base = 4.0 * c

    def edge_up(v: int) -> float:
        # child at depth d, parent at depth d-1: cost (4c)^(height - d)
        return base ** (height - depth[v])

    # cost from each node up to the root
    up = np.zeros(n)
    for v in range(1, n):
        up[v] = up[(v - 1) // 2] + edge_up(v)

    dist = np.zeros((n, n))
    ancestors = []
    for v in range(n):
        chain = [v]
        while chain[-1] != 0:
            chain.append((chain[-1] - 1) // 2)
        ancestors.append(set(chain))
    for u in range(n):
        for v in range(u + 1, n):
            a = u
            while a not in ancestors[v]:
                a = (a - 1) // 2
            d = (up[u] - up[a]) + (up[v] - up[a])
            dist[u, v] = dist[v, u] = d
    ms = from_distance_matrix(dist, normalize=False, validate=True)
    return HST(height=height, c=float(c), space=ms, depth=depth)
