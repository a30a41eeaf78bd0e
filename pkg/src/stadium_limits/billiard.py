"""The collision map, its inverse, tangent map, and macro-stepping."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import BoundaryComponent, PhasePoint, StadiumGeometry, classify
from .kernel import K

DEFAULT_RUN_CAP = 10**7


class MacroKind(enum.Enum):
    SINGLE = 0
    SEGMENT_BOUNCE_RUN = 1
    ARC_SLIDE_RUN = 2


@dataclass(frozen=True)
class CollisionStep:
    next: PhasePoint
    tau: float
    crossed_component: BoundaryComponent


@dataclass(frozen=True)
class MacroStep:
    entry: PhasePoint
    bounce_count: int
    total_tau: float
    kind: MacroKind


def tau_bound(geom: StadiumGeometry) -> float:
    """Upper bound on the free path: diagonal of the bounding box."""
    return math.sqrt((geom.ell + 2.0) ** 2 + 4.0)


def forward(geom: StadiumGeometry, x: PhasePoint) -> CollisionStep:
    """One application of the billiard map."""
    r1, th1, tau = K.step(geom.ell, x.r, x.theta)
    return CollisionStep(PhasePoint(r1 % geom.perimeter, th1), tau,
                         classify(geom, r1))


def backward(geom: StadiumGeometry, x: PhasePoint) -> CollisionStep:
    """One application of the inverse map, via time reversal.

    tau is the flight length into x, i.e. the free path of the returned
    point.
    """
    r1, th1, tau = K.back_step(geom.ell, x.r, x.theta)
    return CollisionStep(PhasePoint(r1 % geom.perimeter, th1), tau,
                         classify(geom, r1))


def tangent_map(geom: StadiumGeometry, x: PhasePoint) -> np.ndarray:
    """Derivative of the collision map at x in (dr, dtheta) coordinates.

    det = cos(theta) / cos(theta_1): the map preserves cos(theta) dr dtheta.
    """
    _, _, _, m00, m01, m10, m11 = K.deriv_step(geom.ell, x.r, x.theta)
    return np.array([[m00, m01], [m10, m11]])


def free_path(geom: StadiumGeometry, x: PhasePoint) -> float:
    return K.step(geom.ell, x.r, x.theta)[2]


def macro_forward(geom: StadiumGeometry, x: PhasePoint,
                  cap: int = DEFAULT_RUN_CAP) -> MacroStep:
    """Advance to the first collision beyond the current bounce/slide run.

    Segment runs are collapsed by unfolding into a straight line (one
    multiply-add, no per-bounce error accumulation); slide runs by the
    constant-angle rotation of the chord map.  bounce_count is the number
    of collisions skipped; total_tau includes the exit flight.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    r1, th1, tau, skipped, kind = K.macro_step(geom.ell, x.r, x.theta, cap)
    return MacroStep(PhasePoint(r1 % geom.perimeter, th1), int(skipped),
                     tau, MacroKind(kind))


def orbit(geom: StadiumGeometry, x: PhasePoint, n: int) -> list[PhasePoint]:
    """The first n+1 points of the forward orbit (including x)."""
    pts = [x]
    r, th = x.r, x.theta
    for _ in range(n):
        r, th, _ = K.step(geom.ell, r, th)
        pts.append(PhasePoint(r % geom.perimeter, th))
    return pts
