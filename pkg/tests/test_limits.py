import math

import numpy as np
import pytest

from stadium_limits.errors import ZeroI
from stadium_limits.geometry import StadiumGeometry
from stadium_limits.limits import (CltReport, TailModel, birkhoff_samples,
                                   correlation, flow_birkhoff, flow_constant,
                                   flow_J_of, flow_pullback, mu0X_check,
                                   raw_birkhoff_sums, tail_report,
                                   theoretical_c, two_y_minus_one,
                                   variance_growth, y_const)
from stadium_limits.observables import (center, centered_free_path,
                                        compute_I, critical_ell, mean_mu0,
                                        mean_tau, segment_bump,
                                        zero_observable)
from stadium_limits.sampling import SeedSpec
from stadium_limits.stats import ks_two_sample

TWO_PI = 2 * math.pi


def test_tail_model_identities(geom):
    y = y_const()
    assert abs(two_y_minus_one() - (2 * y - 1)) <= 1e-12
    assert abs(y - 5.680502) < 1e-6
    tm = TailModel(geom.ell, 0.61)
    c = theoretical_c(geom, 0.61)
    for n in (100, 10_000, 2**20):
        assert abs(tm.Bn_prime(n) ** 2 / (n * math.log(n)) - c) <= 1e-12
    assert abs(tm.l_const - 0.61**2 * 4 / TWO_PI) < 1e-15
    assert abs(tm.l_const_exact - 0.61**2 * 4 / 8.0) < 1e-15
    assert abs(tm.L(math.e) - 0.61**2 * 4 / math.pi) < 1e-14
    # exact and nominal tails differ by exactly pi/4
    assert abs(tm.l_const_exact / tm.l_const - math.pi / 4) < 1e-12


def test_theoretical_c_value(geom):
    I = compute_I(geom, centered_free_path(geom))
    c = theoretical_c(geom, I)
    assert abs(c - 0.066611) < 1e-5
    with pytest.raises(ZeroI):
        theoretical_c(geom, 0.0)


def test_birkhoff_zero_observable(geom):
    samples, rep = birkhoff_samples(geom, zero_observable(), 64, 128,
                                    SeedSpec(61, 0))
    assert np.all(samples == 0.0)


def test_birkhoff_requires_centered(geom):
    with pytest.raises(ValueError):
        birkhoff_samples(geom, segment_bump(geom), 64, 128, SeedSpec(62, 0))


def test_birkhoff_mean_and_determinism(geom):
    obs = centered_free_path(geom)
    s1, rep1 = birkhoff_samples(geom, obs, 512, 400, SeedSpec(63, 0))
    s2, rep2 = birkhoff_samples(geom, obs, 512, 400, SeedSpec(63, 0),
                                workers=2)
    assert np.array_equal(s1, s2)
    assert rep1.ks_distance == rep2.ks_distance
    # centered observable: sample mean within 4 standard errors
    se = s1.std() / math.sqrt(s1.size)
    assert abs(s1.mean()) <= 4 * se


def test_variance_growth_zero(geom):
    fit = variance_growth(geom, zero_observable(), [64, 128, 256], 120,
                          SeedSpec(64, 0))
    assert fit["alpha"] == 0.0
    assert fit["beta"] == 0.0


def test_variance_growth_schedule_shapes(geom):
    obs = centered_free_path(geom)
    fit = variance_growth(geom, obs, [128, 256], [300, 200], SeedSpec(65, 0))
    assert fit["m"] == [300, 200]
    with pytest.raises(ValueError):
        variance_growth(geom, obs, [128, 256], [300], SeedSpec(65, 0))


def test_correlation_lag0_is_variance(geom):
    obs = centered_free_path(geom)
    res = correlation(geom, obs, [0], 400_000, SeedSpec(66, 0), workers=2)
    var = mean_mu0(geom, centered_free_path(geom).with_offset(0.0), 256)
    # oracle: quadrature of tau0^2 against mu0
    from stadium_limits.observables import from_callable
    from stadium_limits.kernel import K
    tb = mean_tau(geom)
    sq = from_callable(lambda r, th: (K.step(geom.ell, r, th)[2] - tb) ** 2,
                       "tau0sq")
    want = mean_mu0(geom, sq, 192)
    row = res[0]
    assert row["ci_lo"] - 0.05 <= want <= row["ci_hi"] + 0.05


def test_correlation_zero_observable(geom):
    res = correlation(geom, zero_observable(), [4, 8], 50_000, SeedSpec(67, 0))
    assert res[4]["estimate"] == 0.0
    assert res[8]["estimate"] == 0.0


def test_correlation_floor_small(geom):
    obs = centered_free_path(geom)
    res = correlation(geom, obs, [8, 16], 2_000_000, SeedSpec(68, 0),
                      workers=2)
    pos = sum(1 for row in res.values() if row["ci_lo"] > 0)
    assert pos >= 1


def test_tail_report_small(geom):
    rep = tail_report(geom, 10**6, SeedSpec(69, 0), workers=2)
    assert abs(rep["phi_survival_slope"] + 2.0) <= 0.35
    assert 0.5 <= rep["phi_prefactor"] / (geom.ell**2 / 4.0) <= 1.7


def test_mu0X_check_exact(geom):
    rep = mu0X_check(geom, 10**6, SeedSpec(70, 0))
    assert abs(rep["estimate"] - rep["closed_form_exact"]) <= 4 * rep["sigma"]
    # and the quoted form is visibly off
    assert abs(rep["estimate"] - rep["closed_form_nominal"]) > 20 * rep["sigma"]


def test_flow_constant_integrates_exactly(geom):
    # Phi == c: the integral over time T is c T, and J = c
    phi = flow_constant(0.8)
    assert abs(flow_J_of(geom, phi) - 0.8) < 1e-12
    from stadium_limits.kernel import K
    glx, glw = np.polynomial.legendre.leggauss(4)
    val = K.flow_integral(geom.ell, 1.0, 0.2, 0.0, 37.5, glx, glw, 1, 0,
                          phi.pars, np.empty(0), np.empty(0),
                          np.empty((0, 0)), None)
    assert abs(val - 0.8 * 37.5) < 1e-9


def test_flow_zero(geom):
    from stadium_limits.limits import FlowObservable, FLOW_ZERO
    phi = FlowObservable("z", FLOW_ZERO)
    samples, rep = flow_birkhoff(geom, phi, 100.0, 100, 4, SeedSpec(71, 0))
    assert np.all(samples == 0.0)
    # a nonzero observable with vanishing perpendicular average is an error
    with pytest.raises(ZeroI):
        flow_birkhoff(geom, flow_constant(0.0), 100.0, 100, 4,
                      SeedSpec(71, 1))


def test_flow_matches_map_distribution(geom):
    # the op-level consistency oracle at its stated size: the pullback
    # f0/tau integrated along the flow tracks the map Birkhoff sums
    obs = centered_free_path(geom)
    I = compute_I(geom, obs)
    phi = flow_pullback(obs)
    T = 1e5
    m = 2000
    fsamp, rep = flow_birkhoff(geom, phi, T, m, 8, SeedSpec(72, 0),
                               workers=2)
    nmap = int(T / mean_tau(geom))
    msamp, _ = birkhoff_samples(geom, obs, nmap, m, SeedSpec(72, 1),
                                "sqrt_cnlogn", I=I, workers=2)
    assert ks_two_sample(fsamp, msamp) <= 0.05
    se = fsamp.std() / math.sqrt(m)
    assert abs(fsamp.mean()) <= 4 * se


def test_birkhoff_average_vanishes(geom):
    # ergodicity sanity: S_n f0 / n -> 0 for centered observables
    obs = centered_free_path(geom)
    n = 100_000
    sums = raw_birkhoff_sums(geom, obs, n, 24, SeedSpec(73, 0), workers=2)
    avg = sums / n
    sd = avg.std() + 1e-12
    assert np.abs(avg).max() <= 5 * max(sd, 3e-3)
