"""The linear near-optimal decomposition ``f = T1 f + T2 f``.

``T1 f`` averages ``f`` over each net cube ``K = Q(e, R(e))``, extends the
resulting values from the net by the Whitney-type formula

    f1(x) = sum_Q phi_Q(x) * tilde(anchor(Q)),

and is constant on the inner holes and outside the working box.  ``T2 f`` is
the residual ``f - T1 f`` at the atoms.  Both maps are linear in ``f`` by
construction.

The smoothness cost of ``f1`` is estimated either by tensor Gauss-Legendre
quadrature of ``max_i |d_i f1|^p`` over the cover cubes, or by the discrete
anchored-difference surrogate summed over neighboring cubes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .concentration import ConcentrationNet, Params
from .geometry import Cube
from .measure import AtomicMeasure, average, lp_norm
from .whitney import PartitionOfUnity, WhitneyCover

__all__ = [
    "Decomposition",
    "build_extension",
    "eval_f1",
    "estimate_sobolev_seminorm",
    "mu_norm_f2",
    "WorkingBoxError",
    "QuadratureError",
]


class WorkingBoxError(RuntimeError):
    """Boundary values of the extension disagree with the far-field constant."""


class QuadratureError(RuntimeError):
    def __init__(self, worst_cube: int, change: float):
        self.worst_cube = worst_cube
        self.change = change
        super().__init__(
            f"seminorm quadrature did not settle; worst cube {worst_cube}, "
            f"last relative change {change:g}"
        )


@dataclass
class Decomposition:
    mu: AtomicMeasure
    f: np.ndarray
    params: Params
    net: ConcentrationNet
    cover: WhitneyCover
    pou: PartitionOfUnity
    tilde: np.ndarray
    far_field: float
    f1_at_atoms: np.ndarray
    f2: np.ndarray
    boundary_mismatch: float

    def to_json_dict(self) -> dict:
        return {
            "tilde": [float(v) for v in self.tilde],
            "far_field": float(self.far_field),
            "f1_at_atoms": [float(v) for v in self.f1_at_atoms],
            "f2": [float(v) for v in self.f2],
            "boundary_mismatch": float(self.boundary_mismatch),
        }


def _boundary_samples(box: Cube, per_edge: int = 7) -> np.ndarray:
    n = box.dim
    lo, hi = box.lo, box.hi
    pts = []
    if n == 1:
        pts = [[lo[0]], [hi[0]]]
    else:
        line = np.linspace(lo[0], hi[0], per_edge)
        for v in (lo[1], hi[1]):
            pts.extend([[x, v] for x in line])
        line = np.linspace(lo[1], hi[1], per_edge)
        for v in (lo[0], hi[0]):
            pts.extend([[v, y] for y in line])
    return np.asarray(pts, dtype=float)


def _eval_values(dec: "Decomposition", X: np.ndarray) -> np.ndarray:
    return np.array([eval_f1(dec, x)[0] for x in np.atleast_2d(X)])


def build_extension(
    f,
    mu: AtomicMeasure,
    net: ConcentrationNet,
    cover: WhitneyCover,
    pou: PartitionOfUnity,
    params: Params,
    strict_far_field: bool = False,
    far_field_tol: float = 1e-6,
) -> Decomposition:
    """Assemble the decomposition for atom values ``f``.

    The far field is the global mu-average of ``f``.  Boundary samples of
    the Whitney formula are compared against it; the worst relative mismatch
    is recorded, and with ``strict_far_field`` a mismatch beyond
    ``far_field_tol`` raises :class:`WorkingBoxError`.  For spread-out
    measures the extension genuinely tends to per-direction limits, so the
    strict check is opt-in.
    """
    values = np.asarray(getattr(f, "values", f), dtype=float).ravel()
    if values.shape[0] != mu.m:
        raise ValueError("function values must align with the atoms")
    if cover.anchors is None:
        raise ValueError("cover has no anchors; call assign_anchors first")

    tilde = np.array(
        [
            average(mu, values, Cube(net.points[i], float(net.radii[i])))
            for i in range(net.size)
        ]
    )
    far_field = float(np.dot(mu.weights, values) / mu.total_mass)

    dec = Decomposition(
        mu=mu,
        f=values,
        params=params,
        net=net,
        cover=cover,
        pou=pou,
        tilde=tilde,
        far_field=far_field,
        f1_at_atoms=np.zeros(mu.m),
        f2=np.zeros(mu.m),
        boundary_mismatch=0.0,
    )
    dec.f1_at_atoms = _eval_values(dec, mu.positions)
    dec.f2 = values - dec.f1_at_atoms

    scale = max(np.max(np.abs(values)) if values.size else 0.0, abs(far_field), 1e-30)
    bvals = _eval_values(dec, _boundary_samples(net.working_box))
    dec.boundary_mismatch = float(np.max(np.abs(bvals - far_field)) / scale)
    net.far_field_average = far_field
    if strict_far_field and dec.boundary_mismatch > far_field_tol:
        raise WorkingBoxError(
            f"working box too small: boundary mismatch {dec.boundary_mismatch:g} "
            f"exceeds {far_field_tol:g}"
        )
    return dec


def eval_f1(dec: Decomposition, x) -> tuple[float, np.ndarray]:
    """Value and gradient of the extension anywhere.

    Convention: the gradient is the zero vector at net points, on the inner
    holes, and outside the working box, where the extension is constant.
    """
    x = np.asarray(x, dtype=float).ravel()
    net, cover = dec.net, dec.cover
    zero = np.zeros(net.n)
    hit = np.nonzero(np.all(x[None, :] == net.points, axis=1))[0]
    if hit.size:
        return float(dec.tilde[hit[0]]), zero
    if np.any(np.abs(x - net.working_box.center) > net.working_box.half_side):
        return dec.far_field, zero
    ids = dec.pou.support_ids(x)
    if ids.size:
        b, g = dec.pou.bump_and_grad(ids, x[None, :])
        b, g = b[0], g[0]
        pos = b > 0.0
        if np.any(pos):
            ids, b, g = ids[pos], b[pos], g[pos]
            t = dec.tilde[cover.anchors[ids]]
            S = b.sum()
            G = g.sum(axis=0)
            value = float(np.dot(t, b) / S)
            # gauge the anchored values to the local mean for cancellation
            tc = t - value
            grad = (tc[:, None] * g).sum(axis=0) / S - (np.dot(tc, b) / (S * S)) * G
            return value, grad
    h = cover.hole_index(x)
    if h >= 0:
        return float(dec.tilde[cover.hole_net[h]]), zero
    raise RuntimeError(f"point {x} is neither covered, outside, nor in a hole")


def mu_norm_f2(dec: Decomposition, p: float | None = None) -> float:
    """Exact atomic Lp(mu) norm of the residual part."""
    if p is None:
        p = dec.params.p
    return lp_norm(dec.mu, dec.f2, p)


def _axis_segments(lo: float, hi: float, cuts: np.ndarray, nodes: np.ndarray, wts: np.ndarray):
    """Mapped Gauss nodes/weights on [lo, hi] split at interior cut points."""
    inner = np.unique(cuts[(cuts > lo) & (cuts < hi)])
    edges = np.concatenate([[lo], inner, [hi]])
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = (b - a) / 2.0
        if half <= 0:
            continue
        xs.append((a + b) / 2.0 + half * nodes)
        ws.append(half * wts)
    return np.concatenate(xs), np.concatenate(ws)


def _cube_gradient_power(dec: Decomposition, i: int, nodes: np.ndarray, wts: np.ndarray, p: float) -> float:
    """Integral of ``max_axis |grad f1|^p`` over cover cube ``i``.

    Neighbor bumps switch on and off inside the cube, so the integrand has
    axis-aligned kinks at the neighbors' plain and dilated faces; the cube is
    split there and each smooth cell integrated with tensor Gauss nodes.
    """
    cover = dec.cover
    n = cover.n
    c, h = cover.centers[i], cover.halves[i]
    local = np.concatenate([[i], cover.neighbors[i]]).astype(int)
    nc = cover.centers[local]
    nh = cover.halves[local]
    sup = PartitionOfUnity.SUPPORT
    per_axis = []
    for ax in range(n):
        cuts = np.concatenate(
            [
                nc[:, ax] - nh,
                nc[:, ax] + nh,
                nc[:, ax] - sup * nh,
                nc[:, ax] + sup * nh,
            ]
        )
        per_axis.append(
            _axis_segments(c[ax] - h, c[ax] + h, cuts, nodes, wts)
        )
    if n == 1:
        X = per_axis[0][0][:, None]
        W = per_axis[0][1]
    else:
        (x0, w0), (x1, w1) = per_axis
        gx, gy = np.meshgrid(x0, x1, indexing="ij")
        X = np.stack([gx.ravel(), gy.ravel()], axis=1)
        W = (w0[:, None] * w1[None, :]).ravel()
    b, g = dec.pou.bump_and_grad(local, X)
    t = dec.tilde[cover.anchors[local]]
    S = b.sum(axis=1)
    G = g.sum(axis=1)
    A = (t[None, :, None] * g).sum(axis=1)
    B = b @ t
    grad = (A * S[:, None] - B[:, None] * G) / (S * S)[:, None]
    mag = np.max(np.abs(grad), axis=1)
    return float(np.dot(W, mag**p))


def estimate_sobolev_seminorm(
    dec: Decomposition,
    method: str = "quadrature",
    rel_tol: float = 1e-3,
    max_rounds: int = 3,
    base_order: int = 4,
) -> float:
    """Estimate ``(integral of max_i |d_i f1|^p)^(1/p)``.

    ``quadrature`` integrates over every cover cube with tensor
    Gauss-Legendre nodes, doubling the order globally until the total moves
    by less than ``rel_tol`` relatively; holes and the box exterior
    contribute nothing because the extension is constant there.
    ``discrete`` returns the anchored-difference surrogate
    ``(sum_K sum_{Q~K} |t(a_Q) - t(a_K)|^p / diam(K)^(p-n))^(1/p)``, an
    upper-bound proxy up to a dimensional constant, for monitoring only.
    """
    p = dec.params.p
    cover = dec.cover
    if method == "discrete":
        total = 0.0
        n = cover.n
        for i in range(cover.size):
            ti = dec.tilde[cover.anchors[i]]
            d = 2.0 * cover.halves[i]
            for j in cover.neighbors[i]:
                tj = dec.tilde[cover.anchors[int(j)]]
                total += abs(tj - ti) ** p / d ** (p - n)
        return total ** (1.0 / p)
    if method != "quadrature":
        raise ValueError(f"unknown seminorm method {method!r}")

    # a cube whose own and neighboring anchored values coincide (up to the
    # rounding floor of the averages) carries a constant extension and
    # contributes nothing; only cubes seeing genuinely mixed values are
    # integrated, which also keeps pure cancellation noise out of the sum
    tol_active = 1e-12 * float(np.max(np.abs(dec.tilde), initial=0.0))
    active = [
        i
        for i in range(cover.size)
        if np.ptp(dec.tilde[cover.anchors[np.concatenate([[i], cover.neighbors[i]]).astype(int)]])
        > tol_active
    ]
    if not active:
        return 0.0

    order = base_order
    rounds: list[tuple[np.ndarray, float]] = []
    for _ in range(max_rounds + 1):
        nodes, wts = leggauss(order)
        parts = np.array(
            [_cube_gradient_power(dec, i, nodes, wts, p) for i in active]
        )
        total = float(parts.sum() ** (1.0 / p))
        if rounds:
            prev_total = rounds[-1][1]
            denom = max(total, prev_total, 1e-300)
            if abs(total - prev_total) <= rel_tol * denom:
                return total
        rounds.append((parts, total))
        order *= 2
    last, prev = rounds[-1], rounds[-2]
    worst = active[int(np.argmax(np.abs(last[0] - prev[0])))]
    raise QuadratureError(worst, abs(last[1] - prev[1]) / max(last[1], 1e-300))
