"""Limit-law experiments: normalizations, Birkhoff samples, variance growth,
correlation floor, tails, and the flow analogue."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .billiard import DEFAULT_RUN_CAP
from .errors import ZeroI
from .geometry import PhasePoint, StadiumGeometry, mu0_of_X, mu0_of_X_nominal
from .kernel import K
from .observables import (KIND_ZERO, I_TOLERANCE, Observable, compute_I,
                          mean_tau, segment_bump)
from .parallel import run_chunks
from .sampling import SeedSpec
from .stats import (bootstrap_ci, ks_distance_normal, loglog_fit,
                    weighted_line_fit)

TWO_PI = 2.0 * math.pi
_EMPTY = np.empty(0)
_EMPTY2 = np.empty((0, 0))

# flow observable kinds (kernel codes)
FLOW_ZERO = 0
FLOW_CONST = 1
FLOW_PULLBACK = 2
FLOW_PYCALL = 5


def y_const() -> float:
    """y = 1 / (1 - (3/4) log 3), the cascade resummation constant."""
    return 1.0 / (1.0 - 0.75 * math.log(3.0))


def two_y_minus_one() -> float:
    """(4 + 3 log 3) / (4 - 3 log 3); equals 2 y - 1."""
    return (4.0 + 3.0 * math.log(3.0)) / (4.0 - 3.0 * math.log(3.0))


def theoretical_c(geom: StadiumGeometry, I: float) -> float:
    """The sqrt(c n log n) constant:

        c = (4 + 3 log 3)/(4 - 3 log 3) * ell^2 I^2 / (4 (pi + ell)).
    """
    if abs(I) <= I_TOLERANCE:
        raise ZeroI("c is undefined for I = 0 (standard CLT regime)")
    return two_y_minus_one() * geom.ell**2 * I**2 / (4.0 * (math.pi + geom.ell))


@dataclass(frozen=True)
class TailModel:
    """Tail functions and normalizing sequences for a P1 observable.

    The nominal fields carry the commonly quoted 1/(2 pi) normalization;
    the exact fields use the true induced-measure normalization (cos-area
    8 of X instead of 2 pi, a factor pi/4).  Both give the same B'_n, so
    the final constant c is unaffected.
    """

    ell: float
    I: float

    @property
    def l_const(self) -> float:
        return self.I**2 * self.ell**2 / TWO_PI

    @property
    def l_const_exact(self) -> float:
        return self.I**2 * self.ell**2 / 8.0

    def L(self, x: float) -> float:
        return self.I**2 * self.ell**2 / math.pi * math.log(x)

    def L_exact(self, x: float) -> float:
        return self.I**2 * self.ell**2 / 4.0 * math.log(x)

    def Bn(self, n: float) -> float:
        return math.sqrt(n * math.log(n) * two_y_minus_one()
                         * self.I**2 * self.ell**2 / TWO_PI)

    def Bn_prime(self, n: float) -> float:
        return math.sqrt(n * math.log(n) * two_y_minus_one()
                         * self.I**2 * self.ell**2
                         / (4.0 * (math.pi + self.ell)))


@dataclass(frozen=True)
class CltReport:
    n: int
    samples: int
    normalization: str
    ks_distance: float
    empirical_variance: float
    variance_ratio: float
    seed: SeedSpec


# ---------------------------------------------------------------------------
# Birkhoff samples


def _mu0_starts_per_sample(geom: StadiumGeometry, seed: SeedSpec, m: int):
    """One start per sample, each from its own stream (worker-independent)."""
    rs = np.empty(m)
    ths = np.empty(m)
    for i in range(m):
        g = seed.child(i).generator()
        rs[i] = g.uniform(0.0, geom.perimeter)
        ths[i] = math.asin(2.0 * g.uniform() - 1.0)
    return rs, ths


_CHUNK = 256


def _birkhoff_chunk(args):
    ell, rs, ths, n, kind, pars, tr, tth, tv = args
    out = np.empty(rs.size)
    K.birkhoff_batch(ell, rs, ths, n, kind, pars, tr, tth, tv, None, out)
    return out


def raw_birkhoff_sums(geom: StadiumGeometry, obs: Observable, n: int, m: int,
                      seed: SeedSpec, workers: int = 1) -> np.ndarray:
    """m Birkhoff sums S_n f0 from mu0 starts (one stream per sample)."""
    rs, ths = _mu0_starts_per_sample(geom, seed, m)
    if obs.pyfunc is not None:
        out = np.empty(m)
        K.birkhoff_batch(geom.ell, rs, ths, n, obs.kind, obs.pars,
                         obs.table_r, obs.table_th, obs.table_v, obs.pyfunc,
                         out)
        return out
    chunks = [(geom.ell, rs[i:i + _CHUNK], ths[i:i + _CHUNK], n, obs.kind,
               obs.pars, obs.table_r, obs.table_th, obs.table_v)
              for i in range(0, m, _CHUNK)]
    return np.concatenate(run_chunks(_birkhoff_chunk, chunks, workers))


def birkhoff_samples(geom: StadiumGeometry, obs: Observable, n: int, m: int,
                     seed: SeedSpec, normalization: str = "sqrt_cnlogn",
                     sigma2: Optional[float] = None, I: Optional[float] = None,
                     workers: int = 1) -> tuple[np.ndarray, CltReport]:
    """Normalized Birkhoff-sum samples and their distribution summary.

    normalization 'sqrt_cnlogn' divides by sqrt(c n log n) (the anomalous
    law); 'sqrt_n' divides by sqrt(sigma2 n) (the standard CLT regime).
    """
    if m < 100:
        raise ValueError("m must be >= 100")
    if not obs.centered and obs.kind != KIND_ZERO:
        raise ValueError("birkhoff_samples requires a centered observable")
    sums = raw_birkhoff_sums(geom, obs, n, m, seed, workers)
    if obs.kind == KIND_ZERO:
        denom = 1.0
    elif normalization == "sqrt_cnlogn":
        if I is None:
            I = compute_I(geom, obs)
        c = theoretical_c(geom, I)
        denom = math.sqrt(c * n * math.log(n))
    elif normalization == "sqrt_n":
        if sigma2 is None or sigma2 <= 0.0:
            raise ValueError("normalization 'sqrt_n' needs sigma2 > 0")
        denom = math.sqrt(sigma2 * n)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    samples = sums / denom
    var = float(np.var(samples))
    report = CltReport(
        n=n, samples=m,
        normalization=normalization,
        ks_distance=ks_distance_normal(samples) if obs.kind != KIND_ZERO else 1.0,
        empirical_variance=float(np.var(sums)),
        variance_ratio=var,
        seed=seed,
    )
    return samples, report


# ---------------------------------------------------------------------------
# variance growth


def variance_growth(geom: StadiumGeometry, obs: Observable, n_grid, m,
                    seed: SeedSpec, workers: int = 1) -> dict:
    """Fit Var(S_n)/n = alpha ln n + beta over the grid.

    Each grid point gets independent samples.  The per-point variance
    estimates are heteroscedastic (heavy-tailed summands make the large-n
    points much noisier), so the fit is inverse-variance weighted least
    squares with weights from the empirical fourth moment; the plain
    unweighted slope is also reported.

    m may be an integer (same sample count everywhere) or a sequence of
    per-grid-point counts (useful to concentrate effort where the variance
    estimator is precise).
    """
    n_grid = sorted(int(n) for n in n_grid)
    if len(n_grid) < 2:
        raise ValueError("need at least two grid points")
    ms = [int(m)] * len(n_grid) if np.isscalar(m) else [int(v) for v in m]
    if len(ms) != len(n_grid):
        raise ValueError("per-point m must match the grid length")
    vs = []
    ws = []
    for j, (n, mj) in enumerate(zip(n_grid, ms)):
        sums = raw_birkhoff_sums(geom, obs, n, mj,
                                 seed.child((j + 1) * 100_000_000),
                                 workers)
        v = float(np.var(sums))
        m4 = float(np.mean((sums - sums.mean()) ** 4))
        vs.append(v / n)
        ws.append(n * n * mj / max(m4 - v * v, 1e-300))
    x = np.log(np.array(n_grid, dtype=float))
    vs_arr = np.array(vs)
    alpha, beta = weighted_line_fit(x, vs_arr, np.array(ws))
    plain = np.polyfit(x, vs_arr, 1)
    return {
        "alpha": alpha,
        "beta": beta,
        "alpha_plain": float(plain[0]),
        "beta_plain": float(plain[1]),
        "n_grid": n_grid,
        "m": ms,
        "var_over_n": vs,
        "weights": ws,
    }


# ---------------------------------------------------------------------------
# correlation floor


def correlation(geom: StadiumGeometry, obs: Observable, lags, pairs: int,
                seed: SeedSpec, per_orbit: int = 8192,
                workers: int = 1) -> dict[int, dict]:
    """Monte Carlo estimate of int f0 . f0 o T0^lag dmu0 with bootstrap CIs.

    Lag products are read along independent mu0-started orbits of length
    per_orbit; `pairs` counts the total lag pairs per lag (approximately).
    """
    lags = sorted(int(v) for v in lags)
    if lags[0] < 0:
        raise ValueError("lags must be nonnegative")
    n_orbits = max(8, int(math.ceil(pairs / max(per_orbit - lags[-1], 1))))
    rs, ths = _mu0_starts_per_sample(geom, seed, n_orbits)
    lag_arr = np.array(lags, dtype=np.int64)
    chunks = [(geom.ell, rs[i:i + 64], ths[i:i + 64], per_orbit, lag_arr,
               obs.kind, obs.pars, obs.table_r, obs.table_th, obs.table_v)
              for i in range(0, n_orbits, 64)]
    per_orbit_means = np.vstack(run_chunks(_corr_chunk, chunks, workers))
    out = {}
    for j, lag in enumerate(lags):
        vals = per_orbit_means[:, j]
        est = float(np.mean(vals))
        lo, hi = bootstrap_ci(vals, seed.child(123_456_789 + j))
        out[lag] = {"estimate": est, "ci_lo": lo, "ci_hi": hi,
                    "n_times_estimate": lag * est,
                    "orbits": int(vals.size)}
    return out


def _corr_chunk(args):
    ell, rs, ths, per_orbit, lags, kind, pars, tr, tth, tv = args
    out = np.empty((rs.size, lags.size))
    for i in range(rs.size):
        sums = np.zeros(lags.size)
        K.corr_orbit(ell, rs[i], ths[i], per_orbit, lags, kind, pars, tr,
                     tth, tv, None, sums)
        out[i] = sums / (per_orbit - lags)
    return out


# ---------------------------------------------------------------------------
# return-time and induced-observable tails


def tail_report(geom: StadiumGeometry, samples: int, seed: SeedSpec,
                obs: Optional[Observable] = None, n_lo: int = 50,
                n_hi: int = 300, workers: int = 1) -> dict:
    """Tail statistics of phi_+ and |f| over mu-samples.

    Returns the log-log slope of the survival function of phi_+ on
    [n_lo, n_hi], the prefactor fits n^3 mu{phi_+ = n} and
    n^2 mu{|f| >= n}, and the raw histograms.  obs defaults to the
    I-normalized segment bump.
    """
    if obs is None:
        obs = segment_bump(geom)
    from .sampling import sample_mu
    rs, ths = sample_mu(geom, seed, samples)
    chunks = [(geom.ell, rs[i:i + 65536], ths[i:i + 65536], obs.kind,
               obs.pars, obs.table_r, obs.table_th, obs.table_v)
              for i in range(0, samples, 65536)]
    parts = run_chunks(_tail_chunk, chunks, workers)
    phi = np.concatenate([p[0] for p in parts])
    fval = np.concatenate([p[1] for p in parts])
    nseg = np.concatenate([p[2] for p in parts])
    narc = np.concatenate([p[3] for p in parts])

    grid = np.arange(n_lo, n_hi + 1)
    # survival-function slope over [n_lo, n_hi]
    surv = np.array([(phi > n).mean() for n in grid[::10]])
    slope, _ = loglog_fit(grid[::10][surv > 0], surv[surv > 0])
    # prefactor of mu{phi_+ = n} ~ C / n^3 via the binned mass
    mass = float(((phi >= n_lo) & (phi <= n_hi)).mean())
    denom = 0.5 * (1.0 / (n_lo - 0.5) ** 2 - 1.0 / (n_hi + 0.5) ** 2)
    phi_prefactor = mass / denom
    # |f| tail prefactor: n^2 mu{|f| >= n} averaged over the window
    af = np.abs(fval)
    fmass = float(((af >= n_lo)).mean() - ((af >= n_hi)).mean())
    f_prefactor = fmass / (1.0 / n_lo**2 - 1.0 / n_hi**2)
    # sliding-only tail exponent (diagnostic)
    sliding = (narc > nseg) & (phi >= n_lo)
    out = {
        "samples": samples,
        "phi_survival_slope": slope,
        "phi_prefactor": float(phi_prefactor),
        "phi_prefactor_theory_nominal": geom.ell**2 / math.pi,
        "phi_prefactor_theory_exact": geom.ell**2 / 4.0,
        "f_prefactor": float(f_prefactor),
        "sliding_fraction_beyond_lo": float(np.mean(sliding)),
        "phi": phi,
        "f_abs": af,
    }
    return out


def _tail_chunk(args):
    ell, rs, ths, kind, pars, tr, tth, tv = args
    m = rs.size
    phi = np.empty(m, dtype=np.int64)
    fsum = np.empty(m)
    nseg = np.empty(m, dtype=np.int64)
    narc = np.empty(m, dtype=np.int64)
    K.excursion_batch(ell, rs, ths, 1, DEFAULT_RUN_CAP, kind, pars, tr, tth,
                      tv, None, phi, fsum, nseg, narc)
    return phi, fsum, nseg, narc


# ---------------------------------------------------------------------------
# mu0(X) check


def mu0X_check(geom: StadiumGeometry, samples: int, seed: SeedSpec) -> dict:
    """Monte Carlo fraction of mu0 points inside X vs the closed forms."""
    from .sampling import sample_mu0
    from .geometry import in_X_array
    rs, ths = sample_mu0(geom, seed, samples)
    frac = float(np.mean(in_X_array(geom, rs, ths)))
    sigma = math.sqrt(frac * (1.0 - frac) / samples)
    return {
        "estimate": frac,
        "sigma": sigma,
        "closed_form_exact": mu0_of_X(geom),
        "closed_form_nominal": mu0_of_X_nominal(geom),
        "samples": samples,
    }


# ---------------------------------------------------------------------------
# flow observables


@dataclass(frozen=True)
class FlowObservable:
    """Observable on the suspension (r, theta, t)."""

    name: str
    kind: int
    map_obs: Optional[Observable] = None
    pyfunc: Optional[Callable[[float, float, float], float]] = None
    pars: np.ndarray = field(default_factory=lambda: np.zeros(8))

    def map_fields(self):
        o = self.map_obs
        if o is None:
            return 0, self.pars, _EMPTY, _EMPTY, _EMPTY2, self.pyfunc
        return o.kind, o.pars, o.table_r, o.table_th, o.table_v, \
            (o.pyfunc if o.pyfunc is not None else self.pyfunc)


def flow_constant(c: float) -> FlowObservable:
    pars = np.zeros(8)
    pars[0] = c
    return FlowObservable(f"flow_const[{c}]", FLOW_CONST, pars=pars)


def flow_pullback(obs: Observable) -> FlowObservable:
    """Phi(x, u) = f0(x) / tau(x): its flight integral telescopes to f0."""
    return FlowObservable(f"pullback[{obs.name}]", FLOW_PULLBACK, map_obs=obs)


def flow_from_callable(f: Callable[[float, float, float], float],
                       name: str) -> FlowObservable:
    return FlowObservable(name, FLOW_PYCALL, pyfunc=f)


def flow_J_of(geom: StadiumGeometry, phi: FlowObservable,
              nodes: int = 256) -> float:
    """Perpendicular average J of a flow observable."""
    from .observables import flow_J
    if phi.kind == FLOW_CONST:
        return float(phi.pars[0])
    if phi.kind == FLOW_ZERO:
        return 0.0
    if phi.kind == FLOW_PULLBACK:
        # along the perpendicular family tau = 2, so J = I(f0)/2 * ... with
        # Phi(r,0,t) = f0(r,0)/2 integrated over t in [0,2]: J = I(f0)/2 * 2 / 2
        def fn(r, th, t):
            tau = K.step(geom.ell, r, th)[2]
            kind, pars, tr, tth, tv, pyf = phi.map_fields()
            return K.obs_eval(geom.ell, r, th, kind, pars, tr, tth, tv,
                              pyf) / tau
        return flow_J(geom, fn, nodes)
    return flow_J(geom, phi.pyfunc, nodes)


def flow_birkhoff(geom: StadiumGeometry, phi: FlowObservable,
                  T_horizon: float, m: int, quad_nodes: int,
                  seed: SeedSpec, J: Optional[float] = None,
                  workers: int = 1) -> tuple[np.ndarray, dict]:
    """Normalized flow integrals Phi_T / sqrt((c/taubar) T log T).

    Starts follow the flow-invariant measure: a mu0 point weighted by its
    flight length (importance resampling) and a uniform offset along that
    flight.
    """
    if phi.kind == FLOW_ZERO:
        return np.zeros(m), {"J": 0.0, "c": 0.0, "taubar": mean_tau(geom),
                             "ks_distance": 1.0}
    if J is None:
        J = flow_J_of(geom, phi)
    if abs(J) <= I_TOLERANCE:
        raise ZeroI("flow normalization undefined for J = 0")
    # J averages over the doubled perpendicular family (both feet of each
    # orbit appear in the r-integral), so the flight sum f0 = int Phi dt
    # has perpendicular average 2J; the anomalous constant is c(2J).
    # Check: Phi = 1 gives J = 1 while f0 = tau has I = 2.
    c = theoretical_c(geom, 2.0 * J)
    taubar = mean_tau(geom)
    g = seed.generator()
    ncand = 4 * m
    rs = g.uniform(0.0, geom.perimeter, ncand)
    ths = np.arcsin(2.0 * g.uniform(size=ncand) - 1.0)
    taus = np.empty(ncand)
    for i in range(ncand):
        taus[i] = K.step(geom.ell, rs[i], ths[i])[2]
    pick = g.choice(ncand, size=m, p=taus / taus.sum())
    u0 = g.uniform(size=m) * taus[pick]
    rs, ths = rs[pick], ths[pick]
    glx, glw = np.polynomial.legendre.leggauss(quad_nodes)
    kind, pars, tr, tth, tv, pyf = phi.map_fields()
    chunks = [(geom.ell, rs[i:i + 64], ths[i:i + 64], u0[i:i + 64],
               T_horizon, glx, glw, phi.kind, kind, pars, tr, tth, tv, pyf)
              for i in range(0, m, 64)]
    vals = np.concatenate(run_chunks(_flow_chunk, chunks,
                                     workers if pyf is None else 1))
    denom = math.sqrt((c / taubar) * T_horizon * math.log(T_horizon))
    samples = vals / denom
    return samples, {"J": J, "c": c, "taubar": taubar,
                     "ks_distance": ks_distance_normal(samples)}


def _flow_chunk(args):
    (ell, rs, ths, u0s, T, glx, glw, fkind, kind, pars, tr, tth, tv,
     pyf) = args
    out = np.empty(rs.size)
    K.flow_batch(ell, rs, ths, u0s, T, glx, glw, fkind, kind, pars, tr, tth,
                 tv, pyf, out)
    return out
