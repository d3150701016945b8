"""Concentration radii and the separated measure-concentration net.

For an atomic measure ``mu`` and ``p > n`` the concentration radius of a
point is

    R(x) = inf { r > 0 : mu(Q(x, r)) >= r^(n-p) },

the crossing radius of the non-decreasing mass function with the decreasing
threshold ``r^(n-p)``.  The mass function of an atomic measure is a right
continuous step function, so the infimum is attained and can be computed in
closed form from the sorted atom distances.

``build_net`` constructs a finite set E inside a working box such that

  * distinct net points satisfy ``6 (R(e1) + R(e2)) <= |e1 - e2|`` exactly;
  * every x in the box has a net point with
    ``|x - e| + R(e) <= 83 (1 + delta_grid) R(x)``,

where ``delta_grid`` is the reported discretization slack of the layered
greedy construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Cube, CubeFamily, as_point
from .measure import AtomicMeasure

__all__ = [
    "Params",
    "ConcentrationNet",
    "concentration_radius",
    "concentration_radius_batch",
    "build_net",
    "verify_concentration",
    "covering_violations",
    "NetCoverageError",
]


class NetCoverageError(RuntimeError):
    """Covering verification failed after the allowed refinement rounds."""

    def __init__(self, worst_x, ratio, bound):
        self.worst_x = worst_x
        self.ratio = ratio
        self.bound = bound
        super().__init__(
            f"net covering bound violated at x={worst_x}: needs {ratio:g}, "
            f"allowed {bound:g}"
        )


@dataclass(frozen=True)
class Params:
    """Exponent and dilation parameters shared across the construction.

    ``tau`` is the anchor dilation (anchors live in ``tau * Q``), ``eta`` the
    derived inner-core factor ``1 / (21 tau)``, and ``gamma`` the containment
    dilation used to validate cube-family assignments, defaulting to
    ``2^8 tau^2``.
    """

    p: float
    tau: float = 9.0
    gamma: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 1):
            raise ValueError(f"p must be finite and > 1, got {self.p}")
        if not self.tau >= 9.0:
            raise ValueError(f"tau must be >= 9, got {self.tau}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def eta(self) -> float:
        return 1.0 / (21.0 * self.tau)

    @property
    def gamma_value(self) -> float:
        return self.gamma if self.gamma is not None else 256.0 * self.tau**2

    def check_dimension(self, n: int) -> None:
        if not self.p > n:
            raise ValueError(f"p must exceed the dimension: p={self.p}, n={n}")


def concentration_radius_batch(mu: AtomicMeasure, p: float, X) -> np.ndarray:
    """Vectorized concentration radii for rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != mu.n:
        raise ValueError(f"dimension mismatch: points {X.shape[1]}, measure {mu.n}")
    if not p > mu.n:
        raise ValueError(f"p must exceed the dimension: p={p}, n={mu.n}")
    kappa = 1.0 / (p - mu.n)
    # distances from each query point to each atom, sorted rowwise
    D = np.max(np.abs(X[:, None, :] - mu.positions[None, :, :]), axis=2)
    order = np.argsort(D, axis=1, kind="stable")
    Ds = np.take_along_axis(D, order, axis=1)
    W = np.take_along_axis(np.broadcast_to(mu.weights, D.shape), order, axis=1)
    cum = np.cumsum(W, axis=1)
    # on [d_k, d_{k+1}) the mass is cum_k; the crossing there, if any, is
    # max(d_k, cum_k^(-kappa))
    thresholds = cum ** (-kappa)
    cand = np.maximum(Ds, thresholds)
    nxt = np.concatenate([Ds[:, 1:], np.full((Ds.shape[0], 1), np.inf)], axis=1)
    valid = cand < nxt
    cand = np.where(valid, cand, np.inf)
    return np.min(cand, axis=1)


def concentration_radius(mu: AtomicMeasure, p: float, x) -> float:
    """Concentration radius at a single point."""
    return float(concentration_radius_batch(mu, p, as_point(x)[None, :])[0])


def _layer_of(v: float) -> int:
    """Index j with 2^(-j-1) < v <= 2^(-j)."""
    j = int(math.floor(-math.log2(v)))
    # guard against log rounding at dyadic boundaries
    while 2.0 ** (-j) < v:
        j -= 1
    while 2.0 ** (-j - 1) >= v:
        j += 1
    return j


@dataclass
class ConcentrationNet:
    """The separated net E with per-point radii and cubes ``K = Q(e, R(e))``."""

    points: np.ndarray
    radii: np.ndarray
    layers: np.ndarray
    working_box: Cube
    delta_grid: float
    theta: float
    params: Params
    far_field_average: float | None = None

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def cubes(self) -> CubeFamily:
        return CubeFamily([Cube(self.points[i], float(self.radii[i])) for i in range(self.size)])

    def point_dists(self, x) -> np.ndarray:
        x = as_point(x)
        return np.max(np.abs(self.points - x), axis=1)

    def nearest(self, x) -> int:
        return int(np.argmin(self.point_dists(x)))

    def covering_lhs(self, x) -> float:
        """Best value of ``|x - e| + R(e)`` over the net."""
        return float(np.min(self.point_dists(x) + self.radii))

    def to_json_dict(self) -> dict:
        return {
            "points": [
                {"e": list(map(float, self.points[i])), "R": float(self.radii[i])}
                for i in range(self.size)
            ],
            "working_box": {
                "center": list(map(float, self.working_box.center)),
                "half_side": float(self.working_box.half_side),
            },
            "delta_grid": float(self.delta_grid),
        }


def _corners(box: Cube) -> np.ndarray:
    axes = [(box.center[i] - box.half_side, box.center[i] + box.half_side) for i in range(box.dim)]
    return np.array(list(itertools.product(*axes)), dtype=float)


def _default_box(mu: AtomicMeasure, p: float, inflation: float) -> Cube:
    center = mu.bounding_center()
    half = mu.bounding_half_width()
    if half == 0.0:
        half = concentration_radius(mu, p, center)
    return Cube(center, half * inflation)


def _layer_candidate_grid(mu: AtomicMeasure, box: Cube, j: int, h: float) -> np.ndarray:
    """Lattice points of spacing ``h`` covering {dist(., atoms) <= 2^-j} in the box."""
    reach = 2.0 ** (-j) + h
    lo = box.lo
    n = mu.n
    max_idx = np.maximum(np.ceil((box.hi - lo) / h).astype(int), 0)
    keys: set[tuple[int, ...]] = set()
    for a in mu.positions:
        i0 = np.floor((a - reach - lo) / h).astype(int)
        i1 = np.ceil((a + reach - lo) / h).astype(int)
        i0 = np.maximum(i0, 0)
        i1 = np.minimum(i1, max_idx)
        if np.any(i1 < i0):
            continue
        ranges = [range(int(i0[d]), int(i1[d]) + 1) for d in range(n)]
        keys.update(itertools.product(*ranges))
    if not keys:
        return np.zeros((0, n))
    idx = np.array(sorted(keys), dtype=float)
    return lo[None, :] + idx * h


def _greedy_layer_net(cand: np.ndarray, radii: np.ndarray, eps: float):
    """Maximal eps-separated subset in rho_R, scanning in lexicographic order."""
    order = np.lexsort(cand.T[::-1])
    keep_pts: list[np.ndarray] = []
    keep_r: list[float] = []
    for i in order:
        x, r = cand[i], radii[i]
        if keep_pts:
            P = np.array(keep_pts)
            rho = np.max(np.abs(P - x), axis=1) + np.array(keep_r) + r
            if np.min(rho) < eps:
                continue
        keep_pts.append(x)
        keep_r.append(float(r))
    if not keep_pts:
        return np.zeros((0, cand.shape[1])), np.zeros(0)
    return np.array(keep_pts), np.array(keep_r)


def _build_once(mu: AtomicMeasure, params: Params, box: Cube, theta: float):
    p = params.p
    n = mu.n
    kappa = 1.0 / (p - n)

    # layer range: R over the box is 1-Lipschitz and bounded below by the
    # total-mass threshold, so anchor samples plus the box radius bracket it
    anchors = [mu.positions, _corners(box), box.center[None, :]]
    if mu.m > 1:
        mids = (mu.positions[:, None, :] + mu.positions[None, :, :]) / 2.0
        anchors.append(mids.reshape(-1, n))
    A = np.unique(np.concatenate(anchors, axis=0), axis=0)
    RA = concentration_radius_batch(mu, p, A)
    r_floor = mu.total_mass ** (-kappa)
    r_max = float(np.max(RA)) + box.half_side
    j_min = _layer_of(r_max)
    j_max = _layer_of(r_floor)

    fixed_pts = np.concatenate([mu.positions, _corners(box)], axis=0)
    fixed_R = concentration_radius_batch(mu, p, fixed_pts)

    layer_pts: dict[int, np.ndarray] = {}
    layer_R: dict[int, np.ndarray] = {}
    for j in range(j_min, j_max + 1):
        h = theta * 2.0 ** (-j)
        grid = _layer_candidate_grid(mu, box, j, h)
        pts = [grid] if grid.size else []
        pts.append(fixed_pts)
        cand = np.unique(np.concatenate(pts, axis=0), axis=0)
        R = concentration_radius_batch(mu, p, cand)
        lo, hi = 2.0 ** (-j - 1), 2.0 ** (-j)
        mask = (R > lo) & (R <= hi)
        inside = np.max(np.abs(cand - box.center), axis=1) <= box.half_side * (1 + 1e-12)
        mask &= inside
        if mask.any():
            eps = 14.0 * 2.0 ** (-j)
            bp, br = _greedy_layer_net(cand[mask], R[mask], eps)
            if bp.shape[0]:
                layer_pts[j] = bp
                layer_R[j] = br

    js = sorted(layer_pts)
    # prune: drop a layer-j point when a finer-layer point is eps_j-close in rho_R
    pruned_pts, pruned_R, pruned_layer = [], [], []
    for j in js:
        eps = 14.0 * 2.0 ** (-j)
        finer_pts = [layer_pts[i] for i in js if i > j]
        if finer_pts:
            FP = np.concatenate(finer_pts, axis=0)
            FR = np.concatenate([layer_R[i] for i in js if i > j])
        else:
            FP = None
        for x, r in zip(layer_pts[j], layer_R[j]):
            if FP is not None:
                rho = np.max(np.abs(FP - x), axis=1) + FR + r
                if np.min(rho) <= eps:
                    continue
            pruned_pts.append(x)
            pruned_R.append(r)
            pruned_layer.append(j)
    if not pruned_pts:
        raise RuntimeError("net construction produced no points")
    P = np.array(pruned_pts)
    R = np.array(pruned_R)
    L = np.array(pruned_layer, dtype=int)

    # exact separation filter: 6 (R1 + R2) <= |e1 - e2|, finest first
    order = np.lexsort((*P.T[::-1], R))
    keep: list[int] = []
    for i in order:
        ok = True
        for k in keep:
            if 6.0 * (R[i] + R[k]) > np.max(np.abs(P[i] - P[k])):
                ok = False
                break
        if ok:
            keep.append(i)
    keep = np.array(keep, dtype=int)
    P, R, L = P[keep], R[keep], L[keep]

    delta = (2.0 + 86.0 * theta) / 83.0
    return ConcentrationNet(P, R, L, box, delta, theta, params)


def _verification_points(mu: AtomicMeasure, box: Cube, per_axis: int = 9) -> np.ndarray:
    lo, hi = box.lo, box.hi
    axes = [np.linspace(lo[d], hi[d], per_axis) for d in range(box.dim)]
    grid = np.array(list(itertools.product(*axes)))
    return np.concatenate([grid, mu.positions, _corners(box)], axis=0)


def covering_violations(net: ConcentrationNet, mu: AtomicMeasure, X) -> list[tuple[np.ndarray, float, float]]:
    """Points of ``X`` whose best ``|x-e| + R(e)`` exceeds ``83 (1+delta) R(x)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    RX = concentration_radius_batch(mu, net.params.p, X)
    bound = 83.0 * (1.0 + net.delta_grid)
    out = []
    for i in range(X.shape[0]):
        lhs = net.covering_lhs(X[i])
        if lhs > bound * RX[i] * (1 + 1e-12):
            out.append((X[i], lhs / RX[i], bound))
    return out


def build_net(
    mu: AtomicMeasure,
    params: Params,
    box_inflation: float = 4.0,
    theta: float = 0.125,
    max_refine: int = 2,
) -> ConcentrationNet:
    """Construct the separated net by layered greedy selection with pruning.

    Candidates per dyadic layer come from a lattice of spacing
    ``theta * 2^-j`` over the layer's reachable region plus the atom
    positions and box corners.  The built net is verified against the
    covering bound on a deterministic sample; on failure the lattice is
    refined (``theta`` halved) up to ``max_refine`` times.
    """
    params.check_dimension(mu.n)
    if not box_inflation >= 1.0:
        raise ValueError("box_inflation must be >= 1")
    box = _default_box(mu, params.p, box_inflation)
    th = theta
    last_violation = None
    for _ in range(max_refine + 1):
        net = _build_once(mu, params, box, th)
        bad = covering_violations(net, mu, _verification_points(mu, box))
        if not bad:
            return net
        last_violation = max(bad, key=lambda t: t[1])
        th /= 2.0
    x, ratio, bound = last_violation
    raise NetCoverageError(x, ratio, bound)


@dataclass
class CheckResult:
    name: str
    ok: bool
    checked: int
    worst: float
    detail: str = ""


@dataclass
class ConcentrationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def add(self, name, ok, checked, worst, detail=""):
        self.checks.append(CheckResult(name, bool(ok), int(checked), float(worst), detail))

    def summary_lines(self) -> list[str]:
        return [
            f"{'ok' if c.ok else 'FAIL'} {c.name} checked={c.checked} worst={c.worst:.9g}"
            + (f" ({c.detail})" if c.detail else "")
            for c in self.checks
        ]


def verify_concentration(
    net: ConcentrationNet,
    mu: AtomicMeasure,
    params: Params,
    rng: np.random.Generator | None = None,
    pairs: int = 200,
    qne_samples: int = 60,
    rel_slack: float = 1e-9,
) -> ConcentrationReport:
    """Report the mass-concentration inequalities for the built net.

    Checks, for every net cube ``K = Q(e, R(e))`` with ``d = diam K``:

      * ``2^(p-n) d^(n-p) <= mu(K) <= 2^(15 p) d^(n-p)``,
      * ``mu(5K) <= 2^(14 p) mu(K)``,

    plus the exact net separation, the distance bound between net cubes, a
    sampled ``mu(Q) <= 42^p (1+theta)^p r^(n-p)`` inequality for cubes far
    from E relative to their size, and the 1-Lipschitz property of R.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    p, n = params.p, mu.n
    rep = ConcentrationReport()

    d = 2.0 * net.radii
    lower = 2.0 ** (p - n) * d ** (n - p)
    upper = 2.0 ** (15.0 * p) * d ** (n - p)
    masses = np.array([mu.mass(Cube(net.points[i], net.radii[i])) for i in range(net.size)])
    ok_lo = np.all(masses >= lower * (1 - rel_slack))
    ok_hi = np.all(masses <= upper * (1 + rel_slack))
    worst_lo = float(np.min(masses / lower)) if net.size else 1.0
    worst_hi = float(np.max(masses / upper)) if net.size else 0.0
    rep.add("mass_lower_bound", ok_lo, net.size, worst_lo, "min mass/bound")
    rep.add("mass_upper_bound", ok_hi, net.size, worst_hi, "max mass/bound")

    m5 = np.array([mu.mass(Cube(net.points[i], 5.0 * net.radii[i])) for i in range(net.size)])
    cap = 2.0 ** (14.0 * p) * masses
    rep.add(
        "five_cube_mass",
        np.all(m5 <= cap * (1 + rel_slack)),
        net.size,
        float(np.max(m5 / cap)) if net.size else 0.0,
        "max mu(5K)/bound",
    )

    worst_sep = np.inf
    ok_sep = True
    for i in range(net.size):
        for k in range(i + 1, net.size):
            gap = np.max(np.abs(net.points[i] - net.points[k]))
            need = 6.0 * (net.radii[i] + net.radii[k])
            worst_sep = min(worst_sep, gap / need)
            if gap < need:
                ok_sep = False
    rep.add(
        "net_separation",
        ok_sep,
        net.size * (net.size - 1) // 2,
        worst_sep if net.size > 1 else np.inf,
        "min gap/6(R1+R2)",
    )

    # diam K + diam K' <= dist(K, K') / 2 for distinct net cubes
    ok_kk = True
    worst_kk = np.inf
    for i in range(net.size):
        for k in range(i + 1, net.size):
            gap = np.max(
                np.maximum(
                    np.abs(net.points[i] - net.points[k]) - (net.radii[i] + net.radii[k]),
                    0.0,
                )
            )
            need = 2.0 * (d[i] + d[k])
            worst_kk = min(worst_kk, gap / need)
            if gap < need:
                ok_kk = False
    rep.add(
        "cube_separation",
        ok_kk,
        net.size * (net.size - 1) // 2,
        worst_kk if net.size > 1 else np.inf,
        "min dist/2(diam+diam')",
    )

    box = net.working_box
    ok_qne = True
    worst_qne = 0.0
    tested = 0
    for theta in (0.5, 1.0, 2.0):
        for _ in range(qne_samples):
            x = box.lo + rng.random(n) * (box.hi - box.lo)
            dist0 = float(np.min(np.max(np.abs(net.points - x), axis=1)))
            if dist0 <= 0:
                continue
            r = 0.9 * theta * dist0 / (2.0 + theta)
            if r <= 0:
                continue
            q = Cube(x, r)
            dqe = float(np.min(np.max(np.maximum(np.abs(net.points - x) - r, 0.0), axis=1)))
            if 2 * r > theta * dqe:
                continue
            tested += 1
            bound = 42.0**p * (1 + theta) ** p * r ** (n - p)
            ratio = mu.mass(q) / bound
            worst_qne = max(worst_qne, ratio)
            if ratio > 1 + rel_slack:
                ok_qne = False
    rep.add("far_cube_mass", ok_qne, tested, worst_qne, "max mu(Q)/bound")

    X = box.lo + rng.random((pairs, n)) * (box.hi - box.lo)
    Y = box.lo + rng.random((pairs, n)) * (box.hi - box.lo)
    RX = concentration_radius_batch(mu, p, X)
    RY = concentration_radius_batch(mu, p, Y)
    gaps = np.max(np.abs(X - Y), axis=1)
    diff = np.abs(RX - RY)
    ok_lip = np.all(diff <= gaps * (1 + rel_slack) + 1e-15)
    worst_lip = float(np.max(diff - gaps))
    rep.add("radius_lipschitz", ok_lip, pairs, worst_lip, "max |dR| - |dx|")

    bad = covering_violations(net, mu, X)
    rep.add(
        "covering",
        not bad,
        pairs,
        max((b[1] / b[2] for b in bad), default=0.0),
        "max lhs/bound over violations",
    )
    return rep
