import numpy as np
import pytest

from sumspace.concentration import (
    Params,
    build_net,
    concentration_radius,
    concentration_radius_batch,
    covering_violations,
    verify_concentration,
)
from sumspace.geometry import Cube
from sumspace.measure import AtomicMeasure


def delta1(x, w=1.0):
    return AtomicMeasure([[x]], [w])


def test_radius_single_atom_examples():
    mu = delta1(0.0)
    # constant mass 1 crosses r^-1 at 1
    assert concentration_radius(mu, 2.0, [0.0]) == pytest.approx(1.0, rel=1e-14)
    # mass jumps to 1 at r=2 where 1 >= 1/2 already holds
    assert concentration_radius(mu, 2.0, [2.0]) == pytest.approx(2.0, rel=1e-14)
    mu4 = delta1(0.0, 4.0)
    assert concentration_radius(mu4, 2.0, [0.0]) == pytest.approx(0.25, rel=1e-14)


def test_radius_single_atom_profile():
    # R(x) = max(|x|, 1) for a unit mass at the origin with p=2
    mu = delta1(0.0)
    xs = np.linspace(-5, 5, 41)[:, None]
    R = concentration_radius_batch(mu, 2.0, xs)
    assert np.allclose(R, np.maximum(np.abs(xs[:, 0]), 1.0), rtol=1e-12)


def test_radius_brute_force_oracle():
    # independent oracle: scan a fine radius grid for the first crossing
    rng = np.random.default_rng(11)
    for n, p in [(1, 1.5), (1, 3.0), (2, 2.5)]:
        m = int(rng.integers(1, 7))
        mu = AtomicMeasure(rng.uniform(-2, 2, size=(m, n)), rng.uniform(0.2, 3.0, size=m))
        for _ in range(10):
            x = rng.uniform(-3, 3, size=n)
            R = concentration_radius(mu, p, x)
            d = np.max(np.abs(mu.positions - x), axis=1)
            # at R the mass dominates the threshold
            assert mu.weights[d <= R * (1 + 1e-12)].sum() >= R ** (n - p) * (1 - 1e-9)
            # slightly below R it does not
            for r in R * (1 - np.array([1e-6, 1e-3, 0.1, 0.5])):
                if r <= 0:
                    continue
                assert mu.weights[d <= r].sum() < r ** (n - p) * (1 + 1e-9)


def test_radius_monotone_in_mass_scaling():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m = int(rng.integers(1, 8))
        mu = AtomicMeasure(rng.uniform(-4, 4, size=(m, 1)), rng.uniform(0.1, 5, size=m))
        c = float(rng.uniform(1.1, 10.0))
        x = rng.uniform(-5, 5, size=1)
        r1 = concentration_radius(mu, 2.0, x)
        r2 = concentration_radius(mu.scaled(c), 2.0, x)
        assert r2 <= r1 * (1 + 1e-12)


def test_radius_lipschitz_random():
    rng = np.random.default_rng(17)
    mu = AtomicMeasure(rng.uniform(-3, 3, size=(6, 2)), rng.uniform(0.3, 2, size=6))
    X = rng.uniform(-5, 5, size=(100, 2))
    Y = rng.uniform(-5, 5, size=(100, 2))
    RX = concentration_radius_batch(mu, 2.5, X)
    RY = concentration_radius_batch(mu, 2.5, Y)
    assert np.all(np.abs(RX - RY) <= np.max(np.abs(X - Y), axis=1) * (1 + 1e-9) + 1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        Params(p=2.0, tau=5.0)
    prm = Params(p=2.0)
    assert prm.eta * 21 * prm.tau == pytest.approx(1.0, rel=1e-15)
    assert prm.gamma_value == 256 * 81
    with pytest.raises(ValueError):
        prm.check_dimension(2)


def test_build_net_single_atom():
    mu = delta1(0.0)
    prm = Params(p=2.0)
    net = build_net(mu, prm)
    assert net.size >= 1
    # exact separation
    for i in range(net.size):
        for k in range(i + 1, net.size):
            gap = np.max(np.abs(net.points[i] - net.points[k]))
            assert 6 * (net.radii[i] + net.radii[k]) <= gap
    # R >= 1 everywhere, so any two net points are at least 12 apart
    if net.size > 1:
        assert min(
            np.max(np.abs(net.points[i] - net.points[k]))
            for i in range(net.size)
            for k in range(i + 1, net.size)
        ) >= 12.0
    # covering spot check at the atom: R(0) = 1
    lhs = net.covering_lhs([0.0])
    assert lhs <= 83.0 * (1 + net.delta_grid)
    assert net.delta_grid <= 0.25


def test_build_net_two_far_atoms():
    mu = AtomicMeasure([[0.0], [1000.0]], [1.0, 1.0])
    prm = Params(p=2.0)
    net = build_net(mu, prm)
    bound = 83.0 * (1 + net.delta_grid)
    for a in ([0.0], [1000.0]):
        R = concentration_radius(mu, 2.0, a)
        assert net.covering_lhs(a) <= bound * R
    assert not covering_violations(net, mu, mu.positions)


@pytest.mark.parametrize(
    "n,p,seed",
    [(1, 1.5, 0), (1, 2.0, 1), (1, 3.0, 2), (2, 2.5, 3), (2, 3.0, 4)],
)
def test_verify_concentration_random(n, p, seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 7))
    mu = AtomicMeasure(
        rng.uniform(-2, 2, size=(m, n)), rng.uniform(0.3, 3.0, size=m)
    )
    prm = Params(p=p)
    net = build_net(mu, prm)
    rep = verify_concentration(net, mu, prm, rng=np.random.default_rng(seed + 100))
    assert rep.ok, "\n".join(rep.summary_lines())


def test_net_points_lie_in_working_box():
    rng = np.random.default_rng(6)
    for seed in range(4):
        r = np.random.default_rng(seed)
        m = int(r.integers(2, 8))
        mu = AtomicMeasure(r.uniform(-30, 30, size=(m, 1)), r.uniform(0.3, 3.0, size=m))
        net = build_net(mu, Params(p=2.0))
        box = net.working_box
        assert np.all(
            np.max(np.abs(net.points - box.center), axis=1)
            <= box.half_side * (1 + 1e-12)
        )


def test_boundary_tight_lower_bound():
    # single unit atom: mass(K) = 1 and the lower bound is exactly 1
    mu = delta1(0.0)
    prm = Params(p=2.0)
    net = build_net(mu, prm)
    i = int(np.argmin(np.max(np.abs(net.points), axis=1)))
    K = Cube(net.points[i], net.radii[i])
    lower = 2.0 ** (2 - 1) * K.diam ** (1 - 2)
    assert mu.mass(K) >= lower * (1 - 1e-9)


def test_lipschitz_spot():
    mu = delta1(0.0)
    r0 = concentration_radius(mu, 2.0, [0.0])
    r2 = concentration_radius(mu, 2.0, [2.0])
    assert abs(r0 - r2) <= 2.0
