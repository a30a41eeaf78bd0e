"""The compiled kernel and the pure-Python twin must agree bit for bit."""

import math

import numpy as np
import pytest

import stadium_limits._kernel_py as KP

KC = pytest.importorskip("stadium_limits._kernel_cy")

ELL = 2.0
EMPTY = np.empty(0)
EMPTY2 = np.empty((0, 0))
PARS_BUMP = np.array([4.375, 0.5, 0, 0, 0, 0, 0, -0.1])


def _starts(m, seed=0):
    g = np.random.default_rng(seed)
    r = g.uniform(0, 2 * math.pi + 2 * ELL, m)
    th = np.arcsin(2 * g.uniform(size=m) - 1)
    return r, th


def test_step_bitwise():
    r, th = _starts(50_000)
    for i in range(r.size):
        assert KC.step(ELL, r[i], th[i]) == KP.step(ELL, r[i], th[i])


def test_orbit_bitwise():
    r, th = 1.234, 0.3
    for _ in range(20_000):
        a = KC.step(ELL, r, th)
        assert a == KP.step(ELL, r, th)
        r, th, _ = a


def test_macro_bitwise():
    r, th = _starts(5000, seed=1)
    for i in range(r.size):
        try:
            a = KC.macro_step(ELL, r[i], th[i], 10**6)
        except Exception as exc:
            with pytest.raises(type(exc)):
                KP.macro_step(ELL, r[i], th[i], 10**6)
            continue
        assert a == KP.macro_step(ELL, r[i], th[i], 10**6)


def test_in_X_agree():
    r, th = _starts(20_000, seed=2)
    for i in range(r.size):
        assert KC.in_X(ELL, r[i], th[i]) == KP.in_X(ELL, r[i], th[i])


def test_excursions_bitwise():
    r, th = _starts(4000, seed=3)
    for i in range(r.size):
        if not KC.in_X(ELL, r[i], th[i]):
            continue
        for direction in (1, -1):
            a = KC.excursion_fast(ELL, r[i], th[i], direction, 10**7)
            b = KP.excursion_fast(ELL, r[i], th[i], direction, 10**7)
            assert a == b
            a = KC.excursion_obs(ELL, r[i], th[i], direction, 10**7, 3,
                                 PARS_BUMP, EMPTY, EMPTY, EMPTY2, None)
            b = KP.excursion_obs(ELL, r[i], th[i], direction, 10**7, 3,
                                 PARS_BUMP, EMPTY, EMPTY, EMPTY2, None)
            assert a == b


def test_deriv_bitwise():
    r, th = _starts(5000, seed=4)
    for i in range(r.size):
        assert KC.deriv_step(ELL, r[i], th[i]) == KP.deriv_step(ELL, r[i],
                                                                th[i])


def test_birkhoff_bitwise():
    r, th = _starts(64, seed=5)
    pars = np.zeros(8)
    pars[7] = -2.1818117971
    for kind, p in ((2, pars), (3, PARS_BUMP)):
        a = np.empty(r.size)
        b = np.empty(r.size)
        KC.birkhoff_batch(ELL, r, th, 500, kind, p, EMPTY, EMPTY, EMPTY2,
                          None, a)
        KP.birkhoff_batch(ELL, r, th, 500, kind, p, EMPTY, EMPTY, EMPTY2,
                          None, b)
        assert np.array_equal(a, b)


def test_stripe_sampler_bitwise():
    g = np.random.default_rng(6)
    for n in (12, 60):
        for _ in range(20):
            u = g.uniform(size=4096)
            assert KC.stripe_sample(ELL, n, u, 0) == \
                KP.stripe_sample(ELL, n, u, 0)


def test_cascade_bitwise():
    g = np.random.default_rng(7)
    for _ in range(15):
        u = g.uniform(size=4096)
        r, th, _, ok = KC.stripe_sample(ELL, 120, u, 0)
        assert ok
        seq_a = np.zeros(80, dtype=np.int64)
        kin_a = np.zeros(80, dtype=np.int64)
        seq_b = np.zeros(80, dtype=np.int64)
        kin_b = np.zeros(80, dtype=np.int64)
        a = KC.cascade(ELL, r, th, 3, 8, 48, 10**7, 3, PARS_BUMP, EMPTY,
                       EMPTY, EMPTY2, None, seq_a, kin_a)
        b = KP.cascade(ELL, r, th, 3, 8, 48, 10**7, 3, PARS_BUMP, EMPTY,
                       EMPTY, EMPTY2, None, seq_b, kin_b)
        assert a == b
        assert np.array_equal(seq_a, seq_b)
        assert np.array_equal(kin_a, kin_b)


def test_flow_bitwise():
    r, th = _starts(30, seed=8)
    u0 = np.zeros(30)
    glx, glw = np.polynomial.legendre.leggauss(6)
    a = np.empty(30)
    b = np.empty(30)
    KC.flow_batch(ELL, r, th, u0, 500.0, glx, glw, 2, 2,
                  np.array([0, 0, 0, 0, 0, 0, 0, -2.1818117971]), EMPTY,
                  EMPTY, EMPTY2, None, a)
    KP.flow_batch(ELL, r, th, u0, 500.0, glx, glw, 2, 2,
                  np.array([0, 0, 0, 0, 0, 0, 0, -2.1818117971]), EMPTY,
                  EMPTY, EMPTY2, None, b)
    assert np.array_equal(a, b)


def test_pycall_observable_matches():
    r, th = _starts(40, seed=9)

    def f(rr, tt):
        return math.sin(rr) * math.cos(tt)

    pars = np.zeros(8)
    a = np.empty(40)
    b = np.empty(40)
    KC.birkhoff_batch(ELL, r, th, 50, 5, pars, EMPTY, EMPTY, EMPTY2, f, a)
    KP.birkhoff_batch(ELL, r, th, 50, 5, pars, EMPTY, EMPTY, EMPTY2, f, b)
    assert np.array_equal(a, b)
