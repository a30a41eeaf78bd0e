"""Observables on the collision space: built-ins, I, means, induced sums."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .billiard import DEFAULT_RUN_CAP
from .errors import ZeroI
from .geometry import PhasePoint, StadiumGeometry
from .induced import in_X
from .kernel import K

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

I_TOLERANCE = 1e-8

_EMPTY = np.empty(0)
_EMPTY2 = np.empty((0, 0))

# kernel observable kinds
KIND_ZERO = 0
KIND_CONST = 1
KIND_TAU = 2
KIND_BUMP = 3
KIND_TABLE = 4
KIND_PYCALL = 5


class PerpClass(enum.Enum):
    """Limit-law class: P1 (I != 0, vanishes on gliding triples), P2 (I = 0),
    or general."""

    P1 = "P1"
    P2 = "P2"
    GENERAL = "general"


@dataclass(frozen=True)
class Observable:
    """A real function of the collision state.

    Built-ins carry a kernel code so the hot loops can evaluate them
    natively; arbitrary callables run on the slow path.  pars[7] is an
    additive offset used for centering.
    """

    name: str
    kind: int
    pars: np.ndarray = field(default_factory=lambda: np.zeros(8))
    table_r: np.ndarray = field(default_factory=lambda: _EMPTY)
    table_th: np.ndarray = field(default_factory=lambda: _EMPTY)
    table_v: np.ndarray = field(default_factory=lambda: _EMPTY2)
    pyfunc: Optional[Callable[[float, float], float]] = None
    centered: bool = False

    def evaluate(self, geom: StadiumGeometry, x: PhasePoint) -> float:
        return K.obs_eval(geom.ell, x.r, x.theta, self.kind, self.pars,
                          self.table_r, self.table_th, self.table_v,
                          self.pyfunc)

    def evaluate_grid(self, geom: StadiumGeometry, r: np.ndarray,
                      th: np.ndarray) -> np.ndarray:
        """Vectorized pointwise evaluation (one-collision Birkhoff sums)."""
        out = np.empty(r.size)
        K.birkhoff_batch(geom.ell, np.ascontiguousarray(r, float).ravel(),
                         np.ascontiguousarray(th, float).ravel(), 1,
                         self.kind, self.pars, self.table_r, self.table_th,
                         self.table_v, self.pyfunc, out)
        return out.reshape(np.shape(r))

    def with_offset(self, delta: float, name: Optional[str] = None,
                    centered: Optional[bool] = None) -> "Observable":
        pars = self.pars.copy()
        pars[7] += delta
        return replace(self, pars=pars, name=name or self.name,
                       centered=self.centered if centered is None else centered)


@dataclass(frozen=True)
class ObservableProfile:
    I: float
    mean_mu0: float
    classification: PerpClass
    induced_tail_constant: float        # nominal form I^2 ell^2 / (2 pi)
    induced_tail_constant_exact: float  # I^2 ell^2 / 8


def zero_observable() -> Observable:
    return Observable("zero", KIND_ZERO)


def constant_observable(c: float) -> Observable:
    pars = np.zeros(8)
    pars[0] = c
    return Observable(f"const[{c}]", KIND_CONST, pars)


def free_path_observable() -> Observable:
    return Observable("tau", KIND_TAU)


def centered_free_path(geom: StadiumGeometry) -> Observable:
    pars = np.zeros(8)
    pars[7] = -mean_tau(geom)
    return Observable("tau0", KIND_TAU, pars, centered=True)


def segment_bump(geom: StadiumGeometry, halfwidth: Optional[float] = None,
                 amplitude: Optional[float] = None) -> Observable:
    """C^2 bump (1-u^2)^3 centered on each segment, zero on the arcs.

    The default amplitude normalizes the perpendicular average to I = 1
    (integral of (1-u^2)^3 is 32/35).
    """
    w = geom.ell / 4.0 if halfwidth is None else halfwidth
    if not 0.0 < w < geom.ell / 2.0:
        raise ValueError("halfwidth must lie strictly inside the segment")
    if amplitude is None:
        amplitude = geom.ell / (w * (32.0 / 35.0) * 2.0) * 2.0
    pars = np.zeros(8)
    pars[0] = amplitude
    pars[1] = w
    return Observable("segment_bump", KIND_BUMP, pars)


def from_callable(f: Callable[[float, float], float], name: str) -> Observable:
    return Observable(name, KIND_PYCALL, pyfunc=f)


def tabulated_observable(path) -> Observable:
    """Load a tabulated observable from CSV `r,theta,value` (rectangular
    grid, row-major in r) and interpolate bilinearly."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError("expected three columns: r,theta,value")
    r = np.unique(data[:, 0])
    th = np.unique(data[:, 1])
    if r.size * th.size != data.shape[0]:
        raise ValueError("grid is not rectangular")
    v = data[:, 2].reshape(r.size, th.size)
    return Observable(f"table[{path}]", KIND_TABLE,
                      table_r=np.ascontiguousarray(r, float),
                      table_th=np.ascontiguousarray(th, float),
                      table_v=np.ascontiguousarray(v, float))


def mean_tau(geom: StadiumGeometry) -> float:
    """Mean free path pi (pi + 2 ell) / (2 ell + 2 pi)."""
    return math.pi * (math.pi + 2.0 * geom.ell) / (2.0 * geom.ell + TWO_PI)


def critical_ell() -> float:
    """The segment length with mean free path exactly 2, (4pi - pi^2)/(2pi - 4)."""
    return (4.0 * math.pi - math.pi**2) / (TWO_PI - 4.0)


def _gauss(nodes: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return mid + half * x, half * w


def compute_I(geom: StadiumGeometry, obs: Observable, nodes: int = 1024) -> float:
    """Average of the observable along the perpendicular bouncing family:

        I = (1/2 ell) [ int_top f(r, 0) dr + int_bottom f(r, 0) dr ].
    """
    if nodes < 2:
        raise ValueError("nodes must be >= 2")
    ell = geom.ell
    total = 0.0
    for a, b in ((math.pi, math.pi + ell),
                 (TWO_PI + ell, TWO_PI + 2.0 * ell)):
        r, w = _gauss(nodes, a, b)
        total += float(w @ obs.evaluate_grid(geom, r, np.zeros_like(r)))
    return total / (2.0 * ell)


def mean_mu0(geom: StadiumGeometry, obs: Observable, grid: int = 1024) -> float:
    """Quadrature of the observable against cos(theta) dr dtheta / (2 L).

    The r-integral is split at the component junctions (the free path is
    only piecewise smooth).
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    ell = geom.ell
    L = geom.perimeter
    th, wth = _gauss(grid, -HALF_PI, HALF_PI)
    cw = np.cos(th) * wth
    breaks = [0.0, math.pi, math.pi + ell, TWO_PI + ell, L]
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        n_r = max(2, int(round(grid * (b - a) / L)))
        r, wr = _gauss(n_r, a, b)
        R, TH = np.meshgrid(r, th, indexing="ij")
        vals = obs.evaluate_grid(geom, R.ravel(), TH.ravel()).reshape(R.shape)
        total += float(wr @ vals @ cw)
    return total / (2.0 * L)


def center(geom: StadiumGeometry, obs: Observable, grid: int = 1024) -> Observable:
    """Subtract the mu0-mean (limit experiments require zero mean)."""
    m = mean_mu0(geom, obs, grid)
    return obs.with_offset(-m, name=obs.name + "_centered", centered=True)


def induced_observable(geom: StadiumGeometry, obs: Observable, x: PhasePoint,
                       cap: int = DEFAULT_RUN_CAP) -> float:
    """f(x) = sum of the observable over the excursion from x to T x,
    evaluated collision by collision."""
    if not in_X(geom, x):
        raise ValueError("induced_observable requires a point of X")
    return K.excursion_obs(geom.ell, x.r, x.theta, 1, cap, obs.kind,
                           obs.pars, obs.table_r, obs.table_th, obs.table_v,
                           obs.pyfunc)[3]


def _triple_same_arc_points(geom: StadiumGeometry, m: int, rng) -> tuple:
    """Sample arc points whose previous and next collisions stay on the arc."""
    out_r = []
    out_th = []
    while len(out_r) < m:
        alpha = rng.uniform(-HALF_PI, HALF_PI, 4 * m)
        th = np.arcsin(2.0 * rng.uniform(size=4 * m) - 1.0)
        keep = (np.abs(alpha - 2.0 * th) >= HALF_PI) & \
               (np.abs(alpha + 2.0 * th) >= HALF_PI)
        side = rng.integers(0, 2, 4 * m).astype(bool)
        r = np.where(side, alpha + HALF_PI,
                     alpha + 3.0 * HALF_PI + geom.ell)
        out_r.extend(r[keep][: m - len(out_r)])
        out_th.extend(th[keep][: m - len(out_th)])
    return np.array(out_r), np.array(out_th)


def classify_observable(geom: StadiumGeometry, obs: Observable,
                        nodes: int = 1024, samples: int = 4096,
                        seed: int = 0) -> ObservableProfile:
    """Profile the observable: I, mean, and the P1/P2/general class.

    P2 means |I| <= tolerance.  P1 additionally requires the observable to
    vanish on points whose neighbours share the same arc (checked by
    sampling the doubly-gliding region).
    """
    I = compute_I(geom, obs, nodes)
    m = mean_mu0(geom, obs, min(nodes, 512))
    if abs(I) <= I_TOLERANCE:
        cls = PerpClass.P2
    else:
        rng = np.random.default_rng(seed)
        r, th = _triple_same_arc_points(geom, samples, rng)
        vals = obs.evaluate_grid(geom, r, th) - obs.pars[7]
        cls = PerpClass.P1 if np.max(np.abs(vals)) <= 1e-12 else PerpClass.GENERAL
    ell = geom.ell
    return ObservableProfile(
        I=I,
        mean_mu0=m,
        classification=cls,
        induced_tail_constant=I * I * ell * ell / TWO_PI,
        induced_tail_constant_exact=I * I * ell * ell / 8.0,
    )


def flow_J(geom: StadiumGeometry, phi: Callable[[float, float, float], float],
           nodes: int = 256) -> float:
    """Perpendicular average of a flow observable:

        J = (1/4 ell) int_segments int_0^2 phi(r, 0, t) dt dr.
    """
    ell = geom.ell
    t, wt = _gauss(nodes, 0.0, 2.0)
    total = 0.0
    for a, b in ((math.pi, math.pi + ell),
                 (TWO_PI + ell, TWO_PI + 2.0 * ell)):
        r, wr = _gauss(nodes, a, b)
        vals = np.array([[phi(ri, 0.0, tj) for tj in t] for ri in r])
        total += float(wr @ vals @ wt)
    return total / (4.0 * ell)


def require_nonzero_I(I: float) -> None:
    if abs(I) <= I_TOLERANCE:
        raise ZeroI(f"perpendicular average I={I!r} is below tolerance")
