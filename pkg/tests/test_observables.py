import math

import numpy as np
import pytest

from stadium_limits.errors import InsufficientSignal, ZeroI
from stadium_limits.geometry import PhasePoint, StadiumGeometry
from stadium_limits.observables import (I_TOLERANCE, Observable, PerpClass,
                                        center, centered_free_path,
                                        classify_observable, compute_I,
                                        constant_observable, critical_ell,
                                        flow_J, free_path_observable,
                                        from_callable, induced_observable,
                                        mean_mu0, mean_tau, segment_bump,
                                        tabulated_observable,
                                        zero_observable)
from stadium_limits.sampling import SeedSpec, sample_stripe

TWO_PI = 2 * math.pi


def test_compute_I_free_path(geom):
    assert abs(compute_I(geom, free_path_observable()) - 2.0) <= 1e-10


def test_compute_I_centered_free_path(geom):
    want = 2.0 - math.pi * (math.pi + 4.0) / (4.0 + TWO_PI)
    got = compute_I(geom, centered_free_path(geom))
    assert abs(got - want) <= 1e-10
    assert abs(want - (-0.18181)) < 1e-4


def test_compute_I_zero(geom):
    assert compute_I(geom, zero_observable()) == 0.0


def test_compute_I_linear(geom, rng):
    # linearity in the observable
    a = segment_bump(geom)
    b = constant_observable(0.7)
    Ia = compute_I(geom, a)
    Ib = compute_I(geom, b)
    combo = from_callable(
        lambda r, th: 2.0 * a.evaluate_grid(geom, np.array([r]),
                                            np.array([th]))[0] + 0.7,
        "combo")
    assert abs(compute_I(geom, combo, nodes=256)
               - (2 * Ia + Ib)) < 1e-6


def test_mean_tau_values(geom):
    assert abs(mean_tau(geom) - 2.1818117971) < 1e-9
    assert abs(mean_tau(StadiumGeometry(1e-12)) - math.pi / 2) < 1e-9
    assert abs(mean_tau(StadiumGeometry(critical_ell())) - 2.0) <= 1e-10


def test_critical_ell():
    ls = critical_ell()
    assert abs(ls - (4 * math.pi - math.pi**2) / (TWO_PI - 4)) <= 1e-12
    g = StadiumGeometry(ls)
    assert abs(mean_tau(g) - 2.0) <= 1e-10
    assert abs(compute_I(g, centered_free_path(g))) <= 1e-10
    # oracle: bisection root of mean_tau(ell) = 2 on [1, 1.5]
    lo, hi = 1.0, 1.5
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mean_tau(StadiumGeometry(mid)) < 2.0:   # mean_tau increases in ell
            lo = mid
        else:
            hi = mid
    assert abs(0.5 * (lo + hi) - ls) <= 1e-10


def test_induced_observable_counting(geom):
    # obs == 1 telescopes to the return time; obs = tau to the flight sum
    x = sample_stripe(geom, 30, SeedSpec(31, 0))
    from stadium_limits.induced import induced_backward
    z = induced_backward(geom, x).end
    one = constant_observable(1.0)
    phi = induced_observable(geom, one, z)
    assert phi == 30
    from stadium_limits.kernel import K
    tau_obs = free_path_observable()
    total = induced_observable(geom, tau_obs, z)
    # oracle: explicit flight-sum replay
    rr, tt, s = z.r, z.theta, 0.0
    for _ in range(30):
        rr, tt, tau = K.step(geom.ell, rr, tt)
        s += tau
    assert abs(total - s) < 1e-12


def test_induced_observable_linear_growth(geom):
    # P1 observable: f ~ n I on long bouncing excursions
    obs = segment_bump(geom)
    I = compute_I(geom, obs)
    from stadium_limits.induced import induced_backward
    base = SeedSpec(32, 0)
    for i, n in enumerate((200, 300, 400)):
        x = sample_stripe(geom, n, base.child(i))
        z = induced_backward(geom, x).end
        val = induced_observable(geom, obs, z)
        assert 0.8 <= val / (n * I) <= 1.2


def test_mean_mu0_free_path(geom):
    got = mean_mu0(geom, free_path_observable(), grid=512)
    assert abs(got - mean_tau(geom)) < 1e-4


def test_mean_mu0_constant(geom):
    assert abs(mean_mu0(geom, constant_observable(3.25), grid=64) - 3.25) < 1e-12


def test_mean_mu0_bump_vs_1d_oracle(geom):
    # theta-independent observable: mean = (int rho dr) / (2 pi + 2 ell)
    obs = segment_bump(geom)
    r = np.linspace(0, geom.perimeter, 800001)
    vals = obs.evaluate_grid(geom, r, np.zeros_like(r))
    oracle = np.trapezoid(vals, r) / geom.perimeter
    got = mean_mu0(geom, obs, grid=1024)
    assert abs(got - oracle) < 1e-8


def test_center_and_classification(geom):
    bump = segment_bump(geom)
    prof = classify_observable(geom, bump)
    assert prof.classification is PerpClass.P1
    assert abs(prof.I - 1.0) < 1e-9
    assert abs(prof.induced_tail_constant - geom.ell**2 / TWO_PI) < 1e-8
    assert abs(prof.induced_tail_constant_exact - geom.ell**2 / 8.0) < 1e-8

    bump0 = center(geom, bump)
    assert bump0.centered
    assert abs(mean_mu0(geom, bump0, grid=1024)) < 1e-10
    # centered bump still vanishes (up to its offset) on gliding triples
    prof0 = classify_observable(geom, bump0)
    assert prof0.classification is PerpClass.P1

    tau0 = centered_free_path(geom)
    assert classify_observable(geom, tau0).classification is PerpClass.GENERAL

    gs = StadiumGeometry(critical_ell())
    assert classify_observable(
        gs, centered_free_path(gs)).classification is PerpClass.P2
    assert classify_observable(geom, zero_observable()).classification \
        is PerpClass.P2


def test_flow_J_constants(geom):
    assert abs(flow_J(geom, lambda r, th, t: 1.0, nodes=32) - 1.0) < 1e-12
    assert flow_J(geom, lambda r, th, t: 0.0, nodes=16) == 0.0


def test_flow_J_pullback_prefactor(geom):
    # the flight sum of Phi = f0/tau is f0, whose perpendicular average is
    # 2 J (each perpendicular orbit contributes both feet to the r-integral)
    from stadium_limits.limits import flow_J_of, flow_pullback
    obs = segment_bump(geom)
    J = flow_J_of(geom, flow_pullback(obs), nodes=256)
    I = compute_I(geom, obs)
    assert abs(2.0 * J - I) < 1e-8


def test_tabulated_observable(tmp_path, geom):
    # tabulate a smooth function on a grid and interpolate
    r = np.linspace(0, geom.perimeter, 220)
    th = np.linspace(-math.pi / 2, math.pi / 2, 160)

    def f(rr, tt):
        return np.sin(rr * 0.61) * np.cos(tt) + 0.3

    rows = ["r,theta,value"]
    for ri in r:
        for tj in th:
            rows.append(f"{float(ri)!r},{float(tj)!r},{float(f(ri, tj))!r}")
    path = tmp_path / "table.csv"
    path.write_text("\n".join(rows) + "\n")
    obs = tabulated_observable(path)
    g = np.random.default_rng(1)
    rr = g.uniform(0.2, geom.perimeter - 0.2, 200)
    tt = g.uniform(-1.2, 1.2, 200)
    got = obs.evaluate_grid(geom, rr, tt)
    assert np.abs(got - f(rr, tt)).max() < 5e-4


def test_tabulated_rejects_ragged(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("r,theta,value\n0,0,1\n1,0,2\n1,1,3\n")
    with pytest.raises(ValueError):
        tabulated_observable(path)


def test_evaluate_matches_grid(geom, rng):
    obs = segment_bump(geom)
    for _ in range(50):
        r = rng.uniform(0, geom.perimeter)
        th = math.asin(2 * rng.uniform() - 1)
        a = obs.evaluate(geom, PhasePoint(r, th))
        b = obs.evaluate_grid(geom, np.array([r]), np.array([th]))[0]
        assert a == b


def test_compute_I_ignores_off_perpendicular_mass(geom):
    # adding any observable that vanishes on the theta = 0 segment line
    # leaves I unchanged
    base = segment_bump(geom)
    I0 = compute_I(geom, base, nodes=256)

    def extra(r, th):
        b = base.evaluate_grid(geom, np.array([r]), np.array([th]))[0]
        return b + math.sin(3 * r) * th * th

    I1 = compute_I(geom, from_callable(extra, "shifted"), nodes=256)
    assert abs(I1 - I0) < 1e-9
