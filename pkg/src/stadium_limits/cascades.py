"""Backward cascades from the bouncing stripes and their statistics.

A cascade iterates the inverse first-return map from a stripe point,
accumulating H = sum_{k=1}^{tau-1} h(T^{-k} x) with h = f o T^{-1}, until
the return time first drops into the standard window [3^p, 3^{p+1} - 1]
(3^p <= n0^{1/4} < 3^{p+1}) or K log(n0) iterations are spent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .billiard import DEFAULT_RUN_CAP
from .errors import DomainTooSmall, InsufficientSignal
from .geometry import PhasePoint, StadiumGeometry
from .induced import ExcursionKind
from .observables import (Observable, PerpClass, classify_observable,
                          compute_I)
from .sampling import SeedSpec, sample_stripe, stripe_sample_point
from .stats import bootstrap_ci
from .kernel import K

DEFAULT_K_CAP = 10.0

_KIND_FROM_CODE = {0: ExcursionKind.BOUNCING, 1: ExcursionKind.SLIDING,
                   2: ExcursionKind.SHORT}


@dataclass(frozen=True)
class CascadeRecord:
    n0: int
    return_sequence: tuple[int, ...]
    stop_index: int
    H: float
    stopped_by_cap: bool
    excursion_kinds: tuple[ExcursionKind, ...]


def standard_stop_level(n0: int) -> int:
    """The integer p with 3^p <= n0^(1/4) < 3^(p+1).

    Integer-exact: the largest p with 81^p <= n0.  Requires n0 >= 81 so
    that p >= 1.
    """
    if n0 < 81:
        raise DomainTooSmall(f"standard stopping needs n0 >= 81, got {n0}")
    return _stop_level_any(n0)


def _stop_level_any(n0: int) -> int:
    """Stop level without the n0 >= 81 guard (p = 0 gives window [1, 2],
    which is a valid stopping rule whenever 3 < n0)."""
    if n0 <= 3:
        raise DomainTooSmall(f"no stopping window below n0 = 4, got {n0}")
    p = 0
    while 81 ** (p + 1) <= n0:
        p += 1
    return p


def stop_window(n0: int) -> tuple[int, int]:
    p = _stop_level_any(n0)
    return 3**p, 3 ** (p + 1) - 1


def run_cascade(geom: StadiumGeometry, obs: Observable, x: PhasePoint,
                cap_K: float = DEFAULT_K_CAP,
                step_cap: int = DEFAULT_RUN_CAP) -> CascadeRecord:
    """One backward cascade from x (a stripe point with phi_-(x) = n0)."""
    # the first backward excursion reveals n0; pre-size for the cap at a
    # generous n0 and re-check afterwards
    max_steps_bound = int(math.ceil(cap_K * math.log(10**9)))
    seq = np.zeros(max_steps_bound + 2, dtype=np.int64)
    kinds = np.zeros(max_steps_bound + 2, dtype=np.int64)
    # peek n0 cheaply to size the cap
    n0 = int(K.excursion_fast(geom.ell, x.r, x.theta, -1, step_cap)[2])
    lo, hi = stop_window(n0)
    max_steps = int(math.ceil(cap_K * math.log(n0)))
    H, stop_index, capped, nfilled = K.cascade(
        geom.ell, x.r, x.theta, lo, hi, max_steps, step_cap, obs.kind,
        obs.pars, obs.table_r, obs.table_th, obs.table_v, obs.pyfunc, seq,
        kinds)
    return CascadeRecord(
        n0=n0,
        return_sequence=tuple(int(v) for v in seq[:nfilled]),
        stop_index=int(stop_index),
        H=float(H),
        stopped_by_cap=bool(capped),
        excursion_kinds=tuple(_KIND_FROM_CODE[int(c)] for c in kinds[:nfilled]),
    )


def _cascade_batch(geom, obs, n0, samples, seed, cap_K, step_cap):
    """H values and cap flags for `samples` cascades from stripe n0."""
    lo, hi = stop_window(n0)
    max_steps = int(math.ceil(cap_K * math.log(n0)))
    seq = np.zeros(max_steps + 2, dtype=np.int64)
    kinds = np.zeros(max_steps + 2, dtype=np.int64)
    H = np.empty(samples)
    capped = np.zeros(samples, dtype=bool)
    for i in range(samples):
        x = stripe_sample_point(geom, n0, seed.child(i))
        h, _, cflag, _ = K.cascade(
            geom.ell, x.r, x.theta, lo, hi, max_steps, step_cap, obs.kind,
            obs.pars, obs.table_r, obs.table_th, obs.table_v, obs.pyfunc,
            seq, kinds)
        H[i] = h
        capped[i] = bool(cflag)
    return H, capped


def cascade_mean(geom: StadiumGeometry, obs: Observable, n_list, samples: int,
                 seed: SeedSpec, cap_K: float = DEFAULT_K_CAP,
                 I: float | None = None) -> dict[int, dict]:
    """Conditional mean E[H | stripe n] / (n I) with a bootstrap CI.

    The target value is y - 1 with y = 1 / (1 - (3/4) log 3).  Requires a
    P1-class observable (nonzero perpendicular average, vanishing on the
    gliding set); cascades that hit the iteration cap are excluded and
    reported.
    """
    if I is None:
        profile = classify_observable(geom, obs)
        if profile.classification is not PerpClass.P1:
            raise InsufficientSignal(
                f"cascade_mean needs a P1 observable, got {profile.classification}")
        I = profile.I
    if abs(I) <= 1e-8:
        raise InsufficientSignal("perpendicular average I is zero")
    out = {}
    for j, n0 in enumerate(n_list):
        H, capped = _cascade_batch(geom, obs, n0, samples,
                                   seed.child(j * 10_000_000), cap_K,
                                   DEFAULT_RUN_CAP)
        good = H[~capped]
        ratios = good / (n0 * I)
        mean = float(np.mean(ratios))
        lo, hi = bootstrap_ci(ratios, seed.child(j * 10_000_000 + 999))
        out[n0] = {
            "mean_ratio": mean,
            "ci_lo": lo,
            "ci_hi": hi,
            "samples": int(good.size),
            "capped_fraction": float(np.mean(capped)),
        }
    return out


def capped_fraction(geom: StadiumGeometry, obs: Observable, n0: int,
                    samples: int, seed: SeedSpec,
                    cap_K: float = DEFAULT_K_CAP) -> float:
    """Fraction of cascades from stripe n0 that hit the K log n cap."""
    _, capped = _cascade_batch(geom, obs, n0, samples, seed, cap_K,
                               DEFAULT_RUN_CAP)
    return float(np.mean(capped))


def transition_histogram(geom: StadiumGeometry, n: int, samples: int,
                         seed: SeedSpec) -> dict:
    """Distribution of the next backward return time from stripe n.

    Returns the empirical counts over i together with the asymptotic law
    3n/(8 i^2) on [n/3, 3n].
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    counts: dict[int, int] = {}
    for i in range(samples):
        x = stripe_sample_point(geom, n, seed.child(i))
        r1, th1, _, _, _, _ = K.excursion_fast(geom.ell, x.r, x.theta, -1,
                                               DEFAULT_RUN_CAP)
        phi2 = int(K.excursion_fast(geom.ell, r1, th1, -1, DEFAULT_RUN_CAP)[2])
        counts[phi2] = counts.get(phi2, 0) + 1
    ivals = np.array(sorted(counts))
    empirical = np.array([counts[i] for i in ivals], dtype=float) / samples
    theory = 3.0 * n / (8.0 * ivals.astype(float) ** 2)
    return {
        "n": n,
        "samples": samples,
        "i": ivals,
        "empirical_p": empirical,
        "theory_p": theory,
        "window_mass": float(empirical[(ivals >= n / 3.0) & (ivals <= 3 * n)].sum()),
    }


def decile_deviation(hist: dict) -> float:
    """Worst relative deviation of the empirical decile masses from the
    3n/(8 i^2) law on [n/3, 3n] (both normalized within the window)."""
    n = hist["n"]
    ilo = int(math.ceil(n / 3.0))
    ihi = 3 * n
    ivals = np.arange(ilo, ihi + 1)
    theory = 3.0 * n / (8.0 * ivals.astype(float) ** 2)
    theory /= theory.sum()
    cum = np.cumsum(theory)
    edges = [ilo]
    for k in range(1, 10):
        edges.append(int(ivals[np.searchsorted(cum, k / 10.0)]) + 1)
    edges.append(ihi + 1)
    emp = np.zeros(ivals.size)
    for i, p in zip(hist["i"], hist["empirical_p"]):
        if ilo <= i <= ihi:
            emp[i - ilo] = p
    emp /= emp.sum()
    worst = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (ivals >= a) & (ivals < b)
        t = theory[sel].sum()
        e = emp[sel].sum()
        worst = max(worst, abs(e - t) / t)
    return worst


def moment_bound_check(geom: StadiumGeometry, obs: Observable, s: float,
                       n_list, samples: int, seed: SeedSpec,
                       cap_K: float = DEFAULT_K_CAP) -> dict[int, float]:
    """Normalized cascade moment E[sum_k |h(T^{-k}x)|^s] / n^s per stripe n.

    Bounded in n for s in [1, 2).
    """
    if not 1.0 <= s < 2.0:
        raise ValueError("s must lie in [1, 2)")
    out = {}
    for j, n0 in enumerate(n_list):
        lo, hi = stop_window(n0)
        max_steps = int(math.ceil(cap_K * math.log(n0)))
        acc = 0.0
        cnt = 0
        sub = seed.child(j * 10_000_000)
        for i in range(samples):
            x = stripe_sample_point(geom, n0, sub.child(i))
            m, _, capped = K.cascade_moment(
                geom.ell, x.r, x.theta, lo, hi, max_steps, DEFAULT_RUN_CAP,
                s, obs.kind, obs.pars, obs.table_r, obs.table_th,
                obs.table_v, obs.pyfunc)
            if not capped:
                acc += m
                cnt += 1
        out[n0] = acc / cnt / n0**s
    return out
