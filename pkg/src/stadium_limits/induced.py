"""The induced set X, return times, first-return map, excursion records."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .billiard import DEFAULT_RUN_CAP
from .geometry import PhasePoint, StadiumGeometry
from .kernel import K

SHORT_THRESHOLD = 8


class ExcursionKind(enum.Enum):
    BOUNCING = "bouncing"
    SLIDING = "sliding"
    SHORT = "short"


@dataclass(frozen=True)
class ExcursionRecord:
    start: PhasePoint
    end: PhasePoint
    return_time: int
    excursion_kind: ExcursionKind
    collision_trace: Optional[tuple[PhasePoint, ...]] = None


def in_X(geom: StadiumGeometry, x: PhasePoint) -> bool:
    """True iff x sits on an arc and its previous collision left that arc.

    Closed form: |alpha - 2 theta| < pi/2 with alpha the position angle on
    the arc (the same-circle chord advances alpha by exactly pi + 2 theta).
    """
    return K.in_X(geom.ell, x.r, x.theta)


def classify_kind(return_time: int, nseg: int, narc: int,
                  arc_pure: bool) -> ExcursionKind:
    """Excursion class from the intermediate-collision counts.

    Short for small return times; otherwise bouncing when the segment
    collisions dominate (ties included), sliding when a single arc does.
    """
    if return_time <= SHORT_THRESHOLD:
        return ExcursionKind.SHORT
    if narc == 0:
        return ExcursionKind.BOUNCING
    if nseg == 0 and arc_pure:
        return ExcursionKind.SLIDING
    return ExcursionKind.BOUNCING if nseg >= narc else ExcursionKind.SLIDING


def _record(geom, x, r1, th1, phi, nseg, narc, arc_pure, trace):
    end = PhasePoint(r1 % geom.perimeter, th1)
    return ExcursionRecord(x, end, int(phi),
                           classify_kind(int(phi), nseg, narc, arc_pure),
                           trace)


def induced_forward(geom: StadiumGeometry, x: PhasePoint,
                    cap: int = DEFAULT_RUN_CAP,
                    want_trace: bool = False) -> ExcursionRecord:
    """First-return map T: X -> X.  Cost is O(component changes)."""
    if not in_X(geom, x):
        raise ValueError("induced_forward requires a point of X")
    r1, th1, phi, nseg, narc, pure = K.excursion_fast(geom.ell, x.r, x.theta,
                                                      1, cap)
    trace = _trace(geom, x, phi, +1) if want_trace else None
    return _record(geom, x, r1, th1, phi, nseg, narc, pure, trace)


def induced_backward(geom: StadiumGeometry, x: PhasePoint,
                     cap: int = DEFAULT_RUN_CAP,
                     want_trace: bool = False) -> ExcursionRecord:
    """Inverse first-return map; return_time is phi_-(x) = phi_+(T^{-1} x)."""
    if not in_X(geom, x):
        raise ValueError("induced_backward requires a point of X")
    r1, th1, phi, nseg, narc, pure = K.excursion_fast(geom.ell, x.r, x.theta,
                                                      -1, cap)
    trace = _trace(geom, x, phi, -1) if want_trace else None
    return _record(geom, x, r1, th1, phi, nseg, narc, pure, trace)


def _trace(geom, x, phi, direction):
    pts = [x]
    r, th = x.r, x.theta
    for _ in range(phi):
        if direction > 0:
            r, th, _ = K.step(geom.ell, r, th)
        else:
            r, th, _ = K.back_step(geom.ell, r, th)
        pts.append(PhasePoint(r % geom.perimeter, th))
    return tuple(pts)


def return_time_forward(geom: StadiumGeometry, x: PhasePoint,
                        cap: int = DEFAULT_RUN_CAP) -> int:
    return int(K.excursion_fast(geom.ell, x.r, x.theta, 1, cap)[2])


def return_time_backward(geom: StadiumGeometry, x: PhasePoint,
                         cap: int = DEFAULT_RUN_CAP) -> int:
    return int(K.excursion_fast(geom.ell, x.r, x.theta, -1, cap)[2])


def expansion_check(geom: StadiumGeometry, x: PhasePoint, steps: int,
                    cap: int = DEFAULT_RUN_CAP) -> dict:
    """Hyperbolicity diagnostics along `steps` returns of the induced map.

    Composes the collision derivative across each excursion and reports,
    per return: the return time, the expansion of a generic tangent vector,
    and the singular values of the one-return derivative (the smallest one
    is the stable-direction contraction factor).
    """
    r, th = x.r, x.theta
    v = np.array([1.0, 1.0]) / math.sqrt(2.0)
    rows = []
    for _ in range(steps):
        r1, th1, phi, m00, m01, m10, m11 = K.excursion_deriv(geom.ell, r, th,
                                                             1, cap)
        M = np.array([[m00, m01], [m10, m11]])
        w = M @ v
        growth = float(np.linalg.norm(w))
        v = w / growth
        sv = np.linalg.svd(M, compute_uv=False)
        rows.append({
            "return_time": int(phi),
            "vector_expansion": growth,
            "sigma_max": float(sv[0]),
            "sigma_min": float(sv[1]),
        })
        r, th = r1, th1
    return {
        "rows": rows,
        "mean_log_expansion": float(np.mean([math.log(t["vector_expansion"])
                                             for t in rows])),
    }
