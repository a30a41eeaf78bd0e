"""Reproducible sampling from mu0, mu, and the bouncing stripes.

Every logical sample owns a counter-based Philox stream keyed by
(master_seed, stream_index), so results depend only on the seed spec and
never on batching or worker scheduling.  Experiment e assigns sample i the
stream index  crc32(e) * 2**32 + i  (see stream_for).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import math

import numpy as np

from .errors import Unreachable
from .geometry import PhasePoint, StadiumGeometry, in_X_array
from .induced import in_X
from .kernel import K

_M64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    """Counter-based RNG stream identity."""

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        key = ((self.master_seed & _M64) << 64) | (self.stream_index & _M64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, (self.stream_index + offset) & _M64)


def stream_for(experiment: str, index: int = 0) -> int:
    """Documented stream-assignment rule: crc32(experiment) * 2**32 + index."""
    return ((zlib.crc32(experiment.encode()) & 0xFFFFFFFF) << 32) + index


def sample_mu0(geom: StadiumGeometry, seed: SeedSpec,
               size: int | None = None):
    """Draw from the invariant measure: r uniform, theta = arcsin(2u - 1)."""
    g = seed.generator()
    n = 1 if size is None else size
    r = g.uniform(0.0, geom.perimeter, n)
    th = np.arcsin(2.0 * g.uniform(size=n) - 1.0)
    if size is None:
        return PhasePoint(float(r[0]), float(th[0]))
    return r, th


def sample_mu(geom: StadiumGeometry, seed: SeedSpec,
              size: int | None = None):
    """Draw from mu (the invariant measure restricted to X) by rejection.

    Proposals are cos-distributed points of the two arcs; in closed form
    the acceptance fraction is 2/pi (the parallelograms occupy 8 of the
    arcs' cos-area 4 pi).
    """
    g = seed.generator()
    n = 1 if size is None else size
    out_r = np.empty(n)
    out_th = np.empty(n)
    have = 0
    while have < n:
        m = max(64, int(1.8 * (n - have)))
        s = g.uniform(0.0, 2.0 * math.pi, m)
        r = np.where(s <= math.pi, s, s + geom.ell)
        th = np.arcsin(2.0 * g.uniform(size=m) - 1.0)
        keep = in_X_array(geom, r, th)
        kr = r[keep]
        kt = th[keep]
        take = min(n - have, kr.size)
        out_r[have:have + take] = kr[:take]
        out_th[have:have + take] = kt[:take]
        have += take
    if size is None:
        return PhasePoint(float(out_r[0]), float(out_th[0]))
    return out_r, out_th


def stripe_sample_point(geom: StadiumGeometry, n: int, seed: SeedSpec,
                        _buffer: int = 4096) -> PhasePoint:
    """One sample of mu conditioned on {phi_- = n, bouncing}.

    Cross-section construction with exact replay; the backward return time
    of the output is re-verified, so phi_-(output) = n always holds.
    """
    if n < 2:
        raise Unreachable("bouncing stripes require a return time >= 2")
    g = seed.generator()
    for _ in range(64):
        u = g.uniform(size=_buffer)
        iu = 0
        while True:
            r, th, iu, ok = K.stripe_sample(geom.ell, n, u, iu)
            if not ok:
                break
            phi, _, narc = _verify_backward(geom, r, th)
            if phi == n and narc == 0:
                return PhasePoint(r % geom.perimeter, th)
    raise Unreachable(f"stripe sampler failed to produce phi_- = {n}")


def _verify_backward(geom, r, th):
    _, _, phi, nseg, narc, _ = K.excursion_fast(geom.ell, r, th, -1, 10**7)
    return phi, nseg, narc


def sample_stripe(geom: StadiumGeometry, n: int, seed: SeedSpec,
                  size: int | None = None):
    """Stripe samples; sample i uses the stream seed.child(i)."""
    if size is None:
        return stripe_sample_point(geom, n, seed)
    pts = [stripe_sample_point(geom, n, seed.child(i)) for i in range(size)]
    return (np.array([p.r for p in pts]), np.array([p.theta for p in pts]))
