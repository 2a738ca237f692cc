"""Data domains for the audit: finite metric spaces, normed box domains,
dataset-level distances, and exact covering/packing search.

Covering and packing numbers are computed by exhaustive search over the
space's own points (internal covers).  An external cover with arbitrary
centers can be smaller, but only by at most a factor-two change of radius,
and internal covers keep the search exact.  Spaces larger than the search
cap are rejected outright rather than approximated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NORMS = ("l1", "l2", "linf")

# Exhaustive searches enumerate up to 2^cap subsets; 20 keeps the worst
# case around a million bitmask operations.
DEFAULT_SEARCH_CAP = 20

# Boundary slack for eta comparisons.  Grid coordinates carry float
# rounding of order 1e-16, so points at distance exactly eta must not
# fall out of a cover by one ulp.
_ETA_SLACK = 1e-9


class UnboundedDomainError(ValueError):
    """An operation needed box bounds but the domain has none."""


class SizeCapError(ValueError):
    """The space exceeds the exhaustive-search cap."""


def _check_norm(norm: str) -> str:
    norm = norm.lower()
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}, expected one of {NORMS}")
    return norm


def vector_norm(v: np.ndarray, norm: str) -> float:
    norm = _check_norm(norm)
    v = np.asarray(v, dtype=float)
    if norm == "l1":
        return float(np.sum(np.abs(v)))
    if norm == "l2":
        return float(np.sqrt(np.sum(v * v)))
    return float(np.max(np.abs(v))) if v.size else 0.0


def pairwise_distances(vectors: np.ndarray, norm: str = "l2") -> np.ndarray:
    """All-pairs distance matrix for row vectors under the given norm."""
    x = np.atleast_2d(np.asarray(vectors, dtype=float))
    diff = x[:, None, :] - x[None, :, :]
    norm = _check_norm(norm)
    if norm == "l1":
        return np.sum(np.abs(diff), axis=-1)
    if norm == "l2":
        return np.sqrt(np.sum(diff * diff, axis=-1))
    return np.max(np.abs(diff), axis=-1)


@dataclass(frozen=True)
class FiniteMetricSpace:
    """A finite point set with an explicit pairwise distance matrix.

    ``points`` are opaque identifiers; all geometry lives in ``dist``.
    Validated on construction: symmetry, zero diagonal, nonnegativity,
    finiteness, and the triangle inequality over all triples.
    """

    points: tuple
    dist: np.ndarray
    unit_ball: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        n = len(self.points)
        if n == 0:
            raise ValueError("a metric space needs at least one point")
        if d.shape != (n, n):
            raise ValueError(f"distance matrix shape {d.shape} != ({n}, {n})")
        if not np.all(np.isfinite(d)):
            raise ValueError("distance matrix has non-finite entries")
        if np.any(d < 0):
            raise ValueError("distances must be nonnegative")
        if np.any(np.abs(np.diagonal(d)) > 1e-12):
            raise ValueError("diagonal of a distance matrix must be zero")
        if not np.allclose(d, d.T, rtol=0, atol=1e-12):
            raise ValueError("distance matrix must be symmetric")
        d = 0.5 * (d + d.T)
        np.fill_diagonal(d, 0.0)
        # triangle inequality: d[i,k] <= d[i,j] + d[j,k] for every j
        for j in range(n):
            if np.any(d > d[:, j, None] + d[None, j, :] + 1e-9):
                raise ValueError("triangle inequality violated")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    def __len__(self) -> int:
        return len(self.points)

    def index(self, point) -> int:
        return self.points.index(point)

    @classmethod
    def from_points(cls, vectors, norm: str = "l2", **kwargs) -> "FiniteMetricSpace":
        """Build a space from row vectors under an l1/l2/linf norm."""
        x = np.atleast_2d(np.asarray(vectors, dtype=float))
        points = tuple(tuple(row) for row in x)
        return cls(points=points, dist=pairwise_distances(x, norm), **kwargs)

    @classmethod
    def from_file(cls, path) -> "FiniteMetricSpace":
        """Load from plain text: first line n, then n rows of n distances."""
        with open(path, "r", encoding="ascii") as fh:
            tokens = fh.read().split()
        if not tokens:
            raise ValueError(f"{path}: empty distance-matrix file")
        n = int(tokens[0])
        vals = tokens[1:]
        if len(vals) != n * n:
            raise ValueError(f"{path}: expected {n * n} entries, found {len(vals)}")
        d = np.array(vals, dtype=float).reshape(n, n)
        return cls(points=tuple(range(n)), dist=d)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            n = len(self)
            fh.write(f"{n}\n")
            for row in self.dist:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


@dataclass(frozen=True)
class NormedSpaceSpec:
    """A d-dimensional normed domain, optionally restricted to a box.

    ``box`` is a (dim, 2) array of per-coordinate [lo, hi] bounds; it is
    required by any operation that needs compactness (diameters).
    """

    dim: int
    norm: str = "l2"
    box: np.ndarray | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        object.__setattr__(self, "norm", _check_norm(self.norm))
        if self.box is not None:
            b = np.array(self.box, dtype=float)
            if b.shape != (self.dim, 2):
                raise ValueError(f"box shape {b.shape} != ({self.dim}, 2)")
            if not np.all(np.isfinite(b)):
                raise ValueError("box bounds must be finite")
            if np.any(b[:, 1] < b[:, 0]):
                raise ValueError("box intervals must be nonempty")
            b.setflags(write=False)
            object.__setattr__(self, "box", b)


@dataclass(frozen=True)
class DatasetDistanceSpec:
    """Distance between equal-length datasets: per-sample distances summed."""

    sample_space: FiniteMetricSpace | NormedSpaceSpec


def sample_distance(space: FiniteMetricSpace | NormedSpaceSpec, a, b) -> float:
    if isinstance(space, FiniteMetricSpace):
        return float(space.dist[space.index(a), space.index(b)])
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return vector_norm(a - b, space.norm)


def dataset_distance(spec: DatasetDistanceSpec, dataset_a: Sequence, dataset_b: Sequence) -> float:
    if len(dataset_a) != len(dataset_b):
        raise ValueError("datasets must have equal length")
    return float(sum(sample_distance(spec.sample_space, a, b)
                     for a, b in zip(dataset_a, dataset_b)))


def diameter(space: FiniteMetricSpace | NormedSpaceSpec) -> float:
    """sup of pairwise distances; analytic corner-to-corner for boxes."""
    if isinstance(space, FiniteMetricSpace):
        return float(space.dist.max())
    if space.box is None:
        raise UnboundedDomainError("diameter needs box bounds on a normed domain")
    widths = space.box[:, 1] - space.box[:, 0]
    return vector_norm(widths, space.norm)


def coordinate_diameters(space: NormedSpaceSpec) -> np.ndarray:
    """Per-coordinate interval widths of the box."""
    if space.box is None:
        raise UnboundedDomainError("coordinate diameters need box bounds")
    return np.array(space.box[:, 1] - space.box[:, 0])


def scale(space: FiniteMetricSpace, c: float) -> FiniteMetricSpace:
    """Rescale all distances by c > 0."""
    if c <= 0:
        raise ValueError("scale factor must be positive")
    return FiniteMetricSpace(points=space.points, dist=space.dist * c,
                             unit_ball=False, meta=dict(space.meta))


def two_point_space(separation: float) -> FiniteMetricSpace:
    d = np.array([[0.0, separation], [separation, 0.0]])
    return FiniteMetricSpace(points=(0, 1), dist=d)


def _cover_masks(space: FiniteMetricSpace, eta: float) -> list[int]:
    slack = _ETA_SLACK * max(1.0, eta)
    within = space.dist <= eta + slack
    return [int(sum(1 << j for j in range(len(space)) if within[i, j]))
            for i in range(len(space))]


def covering_number(space: FiniteMetricSpace, eta: float,
                    cap: int = DEFAULT_SEARCH_CAP) -> int:
    """Minimum number of centers (from the point set) covering every point
    within eta.  Exact, by subset enumeration in increasing size."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    n = len(space)
    if n > cap:
        raise SizeCapError(f"{n} points exceeds exhaustive-search cap {cap}")
    masks = _cover_masks(space, eta)
    full = (1 << n) - 1
    for k in range(1, n + 1):
        for combo in itertools.combinations(range(n), k):
            m = 0
            for i in combo:
                m |= masks[i]
            if m == full:
                return k
    return n  # unreachable: the full set always covers


def packing_number(space: FiniteMetricSpace, eta: float,
                   cap: int = DEFAULT_SEARCH_CAP) -> int:
    """Maximum number of points with pairwise distances >= eta.  Exact,
    by branch-and-bound over compatibility bitmasks."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    n = len(space)
    if n > cap:
        raise SizeCapError(f"{n} points exceeds exhaustive-search cap {cap}")
    slack = _ETA_SLACK * max(1.0, eta)
    apart = space.dist >= eta - slack
    compat = [int(sum(1 << j for j in range(n) if j != i and apart[i, j]))
              for i in range(n)]
    best = 0

    def expand(cand: int, size: int) -> None:
        nonlocal best
        if size > best:
            best = size
        while cand:
            if size + cand.bit_count() <= best:
                return
            v = (cand & -cand).bit_length() - 1
            cand &= cand - 1
            expand(cand & compat[v], size + 1)

    expand((1 << n) - 1, 0)
    return best


def norm_ball_covering_bounds(dim: int, eta: float) -> tuple[float, float]:
    """Lower and upper bounds (1/eta)^d and (1+2/eta)^d on the covering
    number of a unit norm ball.  Overflows to inf for large dim; see
    `norm_ball_covering_bounds_log`."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    lo, hi = norm_ball_covering_bounds_log(dim, eta)
    return (math.exp(lo) if lo < 709 else math.inf,
            math.exp(hi) if hi < 709 else math.inf)


def norm_ball_covering_bounds_log(dim: int, eta: float) -> tuple[float, float]:
    """The same bounds in log space: (d ln(1/eta), d ln(1 + 2/eta))."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return dim * math.log(1.0 / eta), dim * math.log(1.0 + 2.0 / eta)


def discretize_unit_ball(dim: int, spacing: float, norm: str = "l2") -> FiniteMetricSpace:
    """Axis-aligned grid restricted to the unit ball, tagged for use by
    `effective_dimension`.  The spacing is recorded in the space metadata
    because the resulting dimension estimate depends on it."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    norm = _check_norm(norm)
    k = int(math.floor(1.0 / spacing + 1e-9))
    axis = spacing * np.arange(-k, k + 1)
    pts = [p for p in itertools.product(axis, repeat=dim)
           if vector_norm(np.array(p), norm) <= 1.0 + 1e-9]
    arr = np.array(pts, dtype=float)
    return FiniteMetricSpace(points=tuple(map(tuple, pts)),
                             dist=pairwise_distances(arr, norm),
                             unit_ball=True,
                             meta={"spacing": spacing, "norm": norm})


def effective_dimension(space: FiniteMetricSpace | NormedSpaceSpec,
                        cap: int = DEFAULT_SEARCH_CAP) -> float:
    """Log covering number of the unit ball at radius 1/2.

    Finite spaces must be tagged as unit-ball discretizations (see
    `discretize_unit_ball`); the value then comes from exhaustive search.
    For a d-dimensional normed domain the analytic d*ln(2) shortcut is
    used instead.
    """
    if isinstance(space, NormedSpaceSpec):
        return space.dim * math.log(2.0)
    if not space.unit_ball:
        raise ValueError("finite space is not tagged as a unit-ball discretization")
    return math.log(covering_number(space, 0.5, cap=cap))
