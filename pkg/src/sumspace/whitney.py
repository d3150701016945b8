"""Dyadic Whitney cover of the net complement and its partition of unity.

Starting from the working box, dyadic cubes are recursively halved; a cube Q
is kept as soon as ``dist(Q, E) >= diam Q`` (its parent necessarily failed,
which forces ``dist(Q, E) < 4 diam Q``, so every kept cube satisfies

    diam Q <= dist(Q, E) <= 4 diam Q.

Subdivision does not continue forever around net points: once a failing cube
sits inside ``Q(e, eta R(e) / 4)`` it is recorded as an inner hole.  Inside a
hole every anchored value that could influence the extension equals the value
at ``e`` itself, so the extension is exactly constant there and no finer
cubes are needed.

The partition of unity uses per-axis C^2 quintic ramps supported on
``Q* = (9/8) Q``, normalized by the local bump sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .concentration import ConcentrationNet, Params
from .geometry import Cube, CubeFamily

__all__ = [
    "WhitneyCover",
    "PartitionOfUnity",
    "build_whitney",
    "assign_anchors",
    "partition_eval",
    "DepthLimitError",
    "AnchorError",
    "PartitionDomainError",
]


class DepthLimitError(RuntimeError):
    """Net points too close for the dyadic depth limit to resolve."""


class AnchorError(RuntimeError):
    """The nearest net point of a cube fell outside ``tau * Q``."""


class PartitionDomainError(ValueError):
    """Partition evaluated where it is not defined (on E or inside a hole)."""


@dataclass
class WhitneyCover:
    """Selected dyadic cubes with adjacency, anchors and truncation holes."""

    centers: np.ndarray
    halves: np.ndarray
    levels: np.ndarray
    boundary: np.ndarray
    neighbors: list[np.ndarray]
    hole_centers: np.ndarray
    hole_halves: np.ndarray
    hole_net: np.ndarray
    net: ConcentrationNet
    anchors: np.ndarray | None = None
    max_depth: int = 60

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    @property
    def n(self) -> int:
        return self.centers.shape[1]

    def cube(self, i: int) -> Cube:
        return Cube(self.centers[i], float(self.halves[i]))

    def cubes(self) -> CubeFamily:
        return CubeFamily([self.cube(i) for i in range(self.size)])

    @property
    def max_degree(self) -> int:
        return max((len(nb) for nb in self.neighbors), default=0)

    def dist_to_net(self, i: int) -> float:
        gaps = np.maximum(
            np.abs(self.net.points - self.centers[i]) - self.halves[i], 0.0
        )
        return float(np.min(np.max(gaps, axis=1)))

    def containing_cubes(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = np.all(np.abs(x[None, :] - self.centers) <= self.halves[:, None], axis=1)
        return np.nonzero(inside)[0]

    def hole_index(self, x) -> int:
        """Index into the hole arrays containing ``x``, or -1."""
        if self.hole_centers.shape[0] == 0:
            return -1
        x = np.asarray(x, dtype=float)
        inside = np.all(
            np.abs(x[None, :] - self.hole_centers) <= self.hole_halves[:, None], axis=1
        )
        hits = np.nonzero(inside)[0]
        return int(hits[0]) if hits.size else -1

    def to_json_dict(self) -> dict:
        return {
            "cubes": [
                {
                    "c": list(map(float, self.centers[i])),
                    "r": float(self.halves[i]),
                    "level": int(self.levels[i]),
                    "boundary": bool(self.boundary[i]),
                    "anchor": int(self.anchors[i]) if self.anchors is not None else None,
                    "neighbors": list(map(int, self.neighbors[i])),
                }
                for i in range(self.size)
            ],
            "holes": [
                {
                    "c": list(map(float, self.hole_centers[i])),
                    "r": float(self.hole_halves[i]),
                    "net_point": int(self.hole_net[i]),
                }
                for i in range(self.hole_centers.shape[0])
            ],
        }


def _dist_cubes_to_points(C: np.ndarray, H: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Set distance of each cube (C, H) to the nearest point of E."""
    gaps = np.abs(C[:, None, :] - E[None, :, :]) - H[:, None, None]
    np.maximum(gaps, 0.0, out=gaps)
    return np.min(np.max(gaps, axis=2), axis=1)


def build_whitney(net: ConcentrationNet, max_depth: int = 60) -> WhitneyCover:
    """Dyadic Whitney decomposition of the working box minus the net points."""
    if net.size == 0:
        raise ValueError("net is empty")
    E = net.points
    R = net.radii
    eta = net.params.eta
    hole_r = eta * R / 4.0
    box = net.working_box
    n = net.n

    sel_c, sel_h, sel_l = [], [], []
    hol_c, hol_h, hol_e = [], [], []

    offsets = np.array(
        np.meshgrid(*([[-0.5, 0.5]] * n), indexing="ij")
    ).reshape(n, -1).T

    C = box.center[None, :].copy()
    H = np.array([box.half_side])
    level = 0
    while C.shape[0]:
        if level > max_depth:
            # only unresolved multi-point cubes are fatal; they mean the net
            # packs points below the dyadic resolution
            counts = [
                int(np.sum(np.all(np.abs(E - C[i]) <= H[i], axis=1)))
                for i in range(C.shape[0])
            ]
            if any(c >= 2 for c in counts):
                raise DepthLimitError(
                    f"net point density exceeds dyadic depth limit {max_depth}"
                )
            raise DepthLimitError(
                f"dyadic recursion not settled at depth {max_depth}"
            )
        D = _dist_cubes_to_points(C, H, E)
        keep = D >= 2.0 * H
        if np.any(keep):
            sel_c.append(C[keep])
            sel_h.append(H[keep])
            sel_l.append(np.full(int(keep.sum()), level, dtype=int))
        rest_c = C[~keep]
        rest_h = H[~keep]
        if rest_c.shape[0] == 0:
            break
        # inner hole: failing cube contained in Q(e, eta R(e) / 4)
        M = np.max(np.abs(rest_c[:, None, :] - E[None, :, :]), axis=2)
        in_hole = M + rest_h[:, None] <= hole_r[None, :]
        is_hole = np.any(in_hole, axis=1)
        if np.any(is_hole):
            owner = np.argmax(in_hole[is_hole], axis=1)
            hol_c.append(rest_c[is_hole])
            hol_h.append(rest_h[is_hole])
            hol_e.append(owner)
        split_c = rest_c[~is_hole]
        split_h = rest_h[~is_hole]
        if split_c.shape[0] == 0:
            break
        child_h = split_h / 2.0
        C = (split_c[:, None, :] + child_h[:, None, None] * offsets[None, :, :] * 2.0).reshape(
            -1, n
        )
        H = np.repeat(child_h, offsets.shape[0])
        level += 1

    if not sel_c:
        raise RuntimeError("Whitney construction selected no cubes")
    centers = np.concatenate(sel_c, axis=0)
    halves = np.concatenate(sel_h)
    levels = np.concatenate(sel_l)
    holes_c = np.concatenate(hol_c, axis=0) if hol_c else np.zeros((0, n))
    holes_h = np.concatenate(hol_h) if hol_h else np.zeros(0)
    holes_e = np.concatenate(hol_e) if hol_e else np.zeros(0, dtype=int)

    # deterministic order: coarse to fine, then lexicographic
    order = np.lexsort((*centers.T[::-1], levels))
    centers, halves, levels = centers[order], halves[order], levels[order]

    # closed-cube adjacency (chunked pairwise test); the relative slack heals
    # one-ulp rounding of mixed-level half sums, and cannot create false
    # neighbors because disjoint cubes are separated by at least a quarter of
    # the smaller width
    N = centers.shape[0]
    neighbors: list[np.ndarray] = []
    chunk = max(1, int(2e6 // max(N, 1)))
    adj_rows = []
    for s in range(0, N, chunk):
        e = min(N, s + chunk)
        hsum = (halves[s:e, None] + halves[None, :])[..., None]
        gaps = np.abs(centers[s:e, None, :] - centers[None, :, :]) - hsum
        adj_rows.append(np.all(gaps <= 1e-9 * hsum, axis=2))
    adj = np.concatenate(adj_rows, axis=0)
    np.fill_diagonal(adj, False)
    for i in range(N):
        neighbors.append(np.nonzero(adj[i])[0])

    on_edge = np.any(
        np.abs(centers - box.center) + halves[:, None] >= box.half_side * (1 - 1e-15),
        axis=1,
    )
    return WhitneyCover(
        centers=centers,
        halves=halves,
        levels=levels,
        boundary=on_edge,
        neighbors=neighbors,
        hole_centers=holes_c,
        hole_halves=holes_h,
        hole_net=holes_e,
        net=net,
        max_depth=max_depth,
    )


def assign_anchors(cover: WhitneyCover, net: ConcentrationNet, params: Params) -> WhitneyCover:
    """Attach to each cube the nearest net point (ties to the lower id).

    The nearest point always lies in ``9 Q`` because ``dist(Q, E) <= 4 diam Q``;
    a violation of ``tau Q`` indicates an inconsistent net/cover pair.
    """
    E = net.points
    gaps = np.abs(cover.centers[:, None, :] - E[None, :, :]) - cover.halves[:, None, None]
    np.maximum(gaps, 0.0, out=gaps)
    dists = np.max(gaps, axis=2)
    anchors = np.argmin(dists, axis=1)
    center_gap = np.max(
        np.abs(cover.centers - E[anchors]), axis=1
    )
    bad = center_gap > params.tau * cover.halves * (1 + 1e-12)
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise AnchorError(
            f"anchor of cube {i} lies outside tau*Q "
            f"(gap {center_gap[i]:g} > {params.tau * cover.halves[i]:g})"
        )
    cover.anchors = anchors.astype(int)
    return cover


def _ramp(t: np.ndarray) -> np.ndarray:
    """C^2 smoothstep on [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _ramp_deriv(t: np.ndarray) -> np.ndarray:
    inside = (t > 0.0) & (t < 1.0)
    tt = np.where(inside, t, 0.0)
    return np.where(inside, 30.0 * tt * tt * (1.0 - tt) ** 2, 0.0)


class PartitionOfUnity:
    """Bumps ``phi_Q = b_Q / sum_K b_K`` with ``b_Q`` one on Q, zero off (9/8) Q."""

    SUPPORT = 9.0 / 8.0

    def __init__(self, cover: WhitneyCover):
        self.cover = cover

    def bump_and_grad(self, ids: np.ndarray, X: np.ndarray):
        """Per-axis quintic products ``b`` and gradients for cubes ``ids`` at rows of X.

        Returns ``b`` of shape (P, K) and ``grad`` of shape (P, K, n).
        """
        C = self.cover.centers[ids]
        H = self.cover.halves[ids]
        d = X[:, None, :] - C[None, :, :]
        ad = np.abs(d)
        r = H[None, :, None]
        width = r / 8.0
        t = (self.SUPPORT * r - ad) / width
        f = _ramp(t)
        df_dad = _ramp_deriv(t) * (-1.0 / width)
        b = np.prod(f, axis=2)
        grad = np.empty_like(d)
        n = X.shape[1]
        for axis in range(n):
            others = np.prod(np.delete(f, axis, axis=2), axis=2) if n > 1 else 1.0
            grad[:, :, axis] = others * df_dad[:, :, axis] * np.sign(d[:, :, axis])
        return b, grad

    def support_ids(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = np.all(
            np.abs(x[None, :] - self.cover.centers)
            <= self.SUPPORT * self.cover.halves[:, None],
            axis=1,
        )
        return np.nonzero(inside)[0]

    def eval(self, x):
        """List of ``(cube id, phi, grad phi)`` for cubes whose Q* contains x."""
        x = np.asarray(x, dtype=float)
        net = self.cover.net
        if np.any(np.all(x == net.points, axis=1)):
            raise PartitionDomainError("partition undefined on E")
        ids = self.support_ids(x)
        b, g = self.bump_and_grad(ids, x[None, :])
        b, g = b[0], g[0]
        pos = b > 0.0
        ids, b, g = ids[pos], b[pos], g[pos]
        if ids.size == 0:
            h = self.cover.hole_index(x)
            if h >= 0:
                raise PartitionDomainError(
                    "partition truncated inside an inner hole; the extension is "
                    f"constant there (net point {int(self.cover.hole_net[h])})"
                )
            raise PartitionDomainError("point not covered by the Whitney cover")
        S = b.sum()
        G = g.sum(axis=0)
        phi = b / S
        grads = (g * S - b[:, None] * G[None, :]) / (S * S)
        return [(int(i), float(p), grads[k].copy()) for k, (i, p) in enumerate(zip(ids, phi))]


def partition_eval(cover: WhitneyCover, x):
    """Evaluate the partition of unity of ``cover`` at ``x``."""
    return PartitionOfUnity(cover).eval(x)
