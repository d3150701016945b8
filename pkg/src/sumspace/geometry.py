"""Axis-parallel cube geometry in the sup norm.

Everything downstream measures distances in the l-infinity norm, so that
``Q(x, r)`` (the closed cube centered at ``x`` with half-side ``r``) is the
metric ball of radius ``r`` and ``diam Q = 2 r`` exactly.  Cubes are closed:
a shared boundary counts as an intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "as_point",
    "linf_dist",
    "rho_w",
    "Cube",
    "CubeFamily",
    "cubes_intersect",
    "cube_contains",
    "dist_cube_point",
    "dist_cube_cube",
    "dist_cube_set",
    "select_min_disjoint",
    "color_disjoint",
    "DegreeBoundError",
]


class DegreeBoundError(ValueError):
    """A cube intersects more cubes than the promised degree bound."""

    def __init__(self, cube_id: int, degree: int, max_degree: int):
        self.cube_id = cube_id
        self.degree = degree
        self.max_degree = max_degree
        super().__init__(
            f"cube {cube_id} intersects {degree} others, exceeding the "
            f"declared bound {max_degree}"
        )


def as_point(x) -> np.ndarray:
    """Coerce to a finite 1-d float64 coordinate vector."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise ValueError(f"point must be one-dimensional, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    return p


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def linf_dist(a, b) -> float:
    """Sup-norm distance ``max_i |a_i - b_i|``."""
    a = as_point(a)
    b = as_point(b)
    _check_same_dim(a, b)
    return float(np.max(np.abs(a - b)))


def rho_w(a, b, w) -> float:
    """Weighted metric ``|a - b| + w(a) + w(b)`` for distinct points, 0 on the diagonal.

    ``w`` must return strictly positive finite reals; then ``rho_w`` is a
    metric dominating ``w`` on both arguments.
    """
    a = as_point(a)
    b = as_point(b)
    _check_same_dim(a, b)
    if np.array_equal(a, b):
        return 0.0
    wa = float(w(a))
    wb = float(w(b))
    if not (wa > 0.0 and math.isfinite(wa)) or not (wb > 0.0 and math.isfinite(wb)):
        raise ValueError(f"weight function must be positive and finite, got {wa}, {wb}")
    # canonical summation order keeps the metric bitwise symmetric
    lo, hi = (wa, wb) if wa <= wb else (wb, wa)
    return float(np.max(np.abs(a - b))) + lo + hi


@dataclass(frozen=True, eq=False)
class Cube:
    """Closed axis-parallel cube ``Q(center, half_side)`` with side ``2*half_side``."""

    center: np.ndarray
    half_side: float

    def __post_init__(self):
        c = as_point(self.center)
        object.__setattr__(self, "center", c)
        h = float(self.half_side)
        if not (h > 0.0 and math.isfinite(h)):
            raise ValueError(f"half_side must be positive and finite, got {h}")
        object.__setattr__(self, "half_side", h)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def diam(self) -> float:
        """l-infinity diameter, equal to the side length."""
        return 2.0 * self.half_side

    @property
    def lo(self) -> np.ndarray:
        return self.center - self.half_side

    @property
    def hi(self) -> np.ndarray:
        return self.center + self.half_side

    def scaled(self, alpha: float) -> "Cube":
        """The dilation ``alpha * Q`` about the center."""
        if not alpha > 0:
            raise ValueError("dilation factor must be positive")
        return Cube(self.center, alpha * self.half_side)

    def contains_point(self, x) -> bool:
        x = as_point(x)
        _check_same_dim(x, self.center)
        return bool(np.all(np.abs(x - self.center) <= self.half_side))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        c = ",".join(f"{v:g}" for v in self.center)
        return f"Cube(({c}), r={self.half_side:g})"


def cubes_intersect(q1: Cube, q2: Cube) -> bool:
    """Closed-cube intersection test (touching boundaries intersect)."""
    _check_same_dim(q1.center, q2.center)
    return bool(np.all(np.abs(q1.center - q2.center) <= q1.half_side + q2.half_side))


def cube_contains(outer: Cube, inner: Cube) -> bool:
    """Whether ``inner`` is a subset of ``outer`` (closed cubes)."""
    _check_same_dim(outer.center, inner.center)
    return bool(
        np.all(np.abs(outer.center - inner.center) + inner.half_side <= outer.half_side)
    )


def dist_cube_point(q: Cube, x) -> float:
    """Sup-norm distance from the cube (as a set) to a point; 0 if inside."""
    x = as_point(x)
    _check_same_dim(x, q.center)
    gaps = np.maximum(np.abs(x - q.center) - q.half_side, 0.0)
    return float(np.max(gaps))


def dist_cube_cube(q1: Cube, q2: Cube) -> float:
    _check_same_dim(q1.center, q2.center)
    gaps = np.maximum(
        np.abs(q1.center - q2.center) - (q1.half_side + q2.half_side), 0.0
    )
    return float(np.max(gaps))


def dist_cube_set(q: Cube, pts) -> float:
    """Distance from the cube to the nearest of ``pts``; 0 if one lies inside."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.size == 0:
        raise ValueError("empty point list")
    if pts.shape[1] != q.dim:
        raise ValueError(f"dimension mismatch: {pts.shape[1]} vs {q.dim}")
    gaps = np.maximum(np.abs(pts - q.center) - q.half_side, 0.0)
    return float(np.min(np.max(gaps, axis=1)))


class CubeFamily:
    """Ordered list of cubes with stable integer ids (the list position)."""

    def __init__(self, cubes, ids=None):
        self.cubes: list[Cube] = list(cubes)
        if ids is None:
            self.ids = np.arange(len(self.cubes), dtype=int)
        else:
            self.ids = np.asarray(ids, dtype=int)
            if len(self.ids) != len(self.cubes):
                raise ValueError("ids must align with cubes")
            if len(np.unique(self.ids)) != len(self.ids):
                raise ValueError("cube ids must be unique")
        self._centers = None
        self._halves = None

    def __len__(self) -> int:
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def __getitem__(self, i: int) -> Cube:
        return self.cubes[i]

    @property
    def dim(self) -> int:
        if not self.cubes:
            raise ValueError("empty family has no dimension")
        return self.cubes[0].dim

    def centers(self) -> np.ndarray:
        if self._centers is None:
            self._centers = (
                np.array([c.center for c in self.cubes], dtype=float)
                if self.cubes
                else np.zeros((0, 1))
            )
        return self._centers

    def halves(self) -> np.ndarray:
        if self._halves is None:
            self._halves = np.array([c.half_side for c in self.cubes], dtype=float)
        return self._halves

    def diams(self) -> np.ndarray:
        return 2.0 * self.halves()

    def intersection_matrix(self) -> np.ndarray:
        """Boolean matrix of pairwise closed-cube intersections (diagonal True)."""
        if not self.cubes:
            return np.zeros((0, 0), dtype=bool)
        c = self.centers()
        h = self.halves()
        gaps = np.abs(c[:, None, :] - c[None, :, :]) - (h[:, None] + h[None, :])[..., None]
        return np.all(gaps <= 0.0, axis=2)

    def pairwise_disjoint(self) -> bool:
        m = self.intersection_matrix()
        np.fill_diagonal(m, False)
        return not m.any()


def select_min_disjoint(fam: CubeFamily) -> CubeFamily:
    """Greedy minimal-diameter selection of a pairwise disjoint hitting subfamily.

    Repeatedly takes the smallest remaining cube (ties by id) and discards
    everything it intersects.  The output cubes are pairwise disjoint as
    closed sets, and every input cube intersects an output cube of no larger
    diameter.
    """
    k = len(fam)
    if k == 0:
        return CubeFamily([], ids=[])
    c = fam.centers()
    h = fam.halves()
    inter = np.all(
        np.abs(c[:, None, :] - c[None, :, :]) <= (h[:, None] + h[None, :])[..., None],
        axis=2,
    )
    alive = np.ones(k, dtype=bool)
    order = np.lexsort((fam.ids, h))  # half_side ascending, then id
    chosen: list[int] = []
    for i in order:
        if not alive[i]:
            continue
        chosen.append(i)
        alive &= ~inter[i]
    return CubeFamily([fam.cubes[i] for i in chosen], ids=[int(fam.ids[i]) for i in chosen])


def color_disjoint(fam: CubeFamily, max_degree: int) -> list[CubeFamily]:
    """First-fit coloring of the cube intersection graph into disjoint classes.

    With every cube meeting at most ``max_degree`` others, first-fit in id
    order uses at most ``max_degree + 1`` classes.  A cube found to exceed the
    bound raises :class:`DegreeBoundError`.
    """
    k = len(fam)
    if k == 0:
        return []
    inter = fam.intersection_matrix()
    np.fill_diagonal(inter, False)
    degrees = inter.sum(axis=1)
    worst = int(np.argmax(degrees))
    if degrees[worst] > max_degree:
        raise DegreeBoundError(int(fam.ids[worst]), int(degrees[worst]), max_degree)
    order = np.argsort(fam.ids)
    color = np.full(k, -1, dtype=int)
    for i in order:
        used = {int(color[j]) for j in np.nonzero(inter[i])[0] if color[j] >= 0}
        c = 0
        while c in used:
            c += 1
        color[i] = c
    n_classes = int(color.max()) + 1
    classes = []
    for c in range(n_classes):
        members = np.nonzero(color == c)[0]
        classes.append(
            CubeFamily([fam.cubes[i] for i in members], ids=[int(fam.ids[i]) for i in members])
        )
    return classes
