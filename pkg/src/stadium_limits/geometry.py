"""Stadium boundary, arclength coordinates, and invariant-measure densities.

The stadium is two unit semicircles joined by two horizontal segments of
length ell.  Arclength r runs counterclockwise from the lower endpoint of
the right semicircle: right arc [0, pi], top segment [pi, pi+ell], left arc
[pi+ell, 2pi+ell], bottom segment [2pi+ell, 2pi+2ell].  Phase points are
(r, theta) with theta in (-pi/2, pi/2) the angle from the inward normal,
increasing counterclockwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


class BoundaryComponent(enum.Enum):
    RIGHT_ARC = 0
    TOP_SEGMENT = 1
    LEFT_ARC = 2
    BOTTOM_SEGMENT = 3

    @property
    def is_arc(self) -> bool:
        return self in (BoundaryComponent.RIGHT_ARC, BoundaryComponent.LEFT_ARC)


@dataclass(frozen=True)
class StadiumGeometry:
    """Shape parameter ell > 0 (circle radius is fixed at 1)."""

    ell: float

    def __post_init__(self):
        if not (self.ell > 0.0) or not math.isfinite(self.ell):
            raise ValueError(f"ell must be a positive real, got {self.ell!r}")

    @property
    def perimeter(self) -> float:
        return TWO_PI + 2.0 * self.ell

    def component_range(self, comp: BoundaryComponent) -> tuple[float, float]:
        ell = self.ell
        return {
            BoundaryComponent.RIGHT_ARC: (0.0, math.pi),
            BoundaryComponent.TOP_SEGMENT: (math.pi, math.pi + ell),
            BoundaryComponent.LEFT_ARC: (math.pi + ell, TWO_PI + ell),
            BoundaryComponent.BOTTOM_SEGMENT: (TWO_PI + ell, TWO_PI + 2 * ell),
        }[comp]


@dataclass(frozen=True)
class PhasePoint:
    """Boundary collision state (r mod perimeter, |theta| < pi/2)."""

    r: float
    theta: float

    def __post_init__(self):
        if not abs(self.theta) < HALF_PI:
            raise ValueError(f"|theta| must be < pi/2, got {self.theta!r}")

    def reduced(self, geom: StadiumGeometry) -> "PhasePoint":
        return PhasePoint(self.r % geom.perimeter, self.theta)


def classify(geom: StadiumGeometry, r: float) -> BoundaryComponent:
    """Component containing r mod perimeter; arcs closed, segments open."""
    r = r % geom.perimeter
    if r <= math.pi:
        return BoundaryComponent.RIGHT_ARC
    if r < math.pi + geom.ell:
        return BoundaryComponent.TOP_SEGMENT
    if r <= TWO_PI + geom.ell:
        return BoundaryComponent.LEFT_ARC
    return BoundaryComponent.BOTTOM_SEGMENT


def boundary_point(geom: StadiumGeometry, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian position and inward unit normal at arclength r.

    Arc centers sit at (+-ell/2, 0); the segments are y = +-1.
    """
    ell = geom.ell
    half = 0.5 * ell
    r = r % geom.perimeter
    if r <= math.pi:
        a = r - HALF_PI
        pos = np.array([half + math.cos(a), math.sin(a)])
        normal = np.array([-math.cos(a), -math.sin(a)])
    elif r < math.pi + ell:
        pos = np.array([half - (r - math.pi), 1.0])
        normal = np.array([0.0, -1.0])
    elif r <= TWO_PI + ell:
        a = r - (math.pi + ell) + HALF_PI
        pos = np.array([-half + math.cos(a), math.sin(a)])
        normal = np.array([-math.cos(a), -math.sin(a)])
    else:
        pos = np.array([(r - (TWO_PI + ell)) - half, -1.0])
        normal = np.array([0.0, 1.0])
    return pos, normal


def to_cartesian(geom: StadiumGeometry, x: PhasePoint) -> tuple[np.ndarray, np.ndarray]:
    """Embed a phase point: (position, post-collision unit velocity)."""
    pos, n = boundary_point(geom, x.r)
    c = math.cos(x.theta)
    s = math.sin(x.theta)
    direction = np.array([c * n[0] - s * n[1], s * n[0] + c * n[1]])
    return pos, direction


def arclength_of_point(geom: StadiumGeometry, pos, comp: BoundaryComponent) -> float:
    """Inverse of boundary_point on the given component."""
    ell = geom.ell
    half = 0.5 * ell
    x, y = float(pos[0]), float(pos[1])
    if comp is BoundaryComponent.RIGHT_ARC:
        return math.atan2(y, x - half) + HALF_PI
    if comp is BoundaryComponent.TOP_SEGMENT:
        return math.pi + (half - x)
    if comp is BoundaryComponent.LEFT_ARC:
        a = math.atan2(y, x + half)
        alpha = a - math.pi if a >= 0.0 else a + math.pi
        return 3.0 * HALF_PI + ell + alpha
    return TWO_PI + ell + (x + half)


def from_cartesian(geom: StadiumGeometry, pos, direction) -> PhasePoint:
    """Reconstruct (r, theta) from a boundary position and outgoing velocity.

    The position is snapped to the nearest boundary component; theta is
    clamped strictly inside (-pi/2, pi/2).
    """
    ell = geom.ell
    half = 0.5 * ell
    x, y = float(pos[0]), float(pos[1])
    if x >= half:
        comp = BoundaryComponent.RIGHT_ARC
    elif x <= -half:
        comp = BoundaryComponent.LEFT_ARC
    else:
        comp = BoundaryComponent.TOP_SEGMENT if y > 0 else BoundaryComponent.BOTTOM_SEGMENT
    r = arclength_of_point(geom, pos, comp)
    _, n = boundary_point(geom, r)
    dx, dy = float(direction[0]), float(direction[1])
    norm = math.hypot(dx, dy)
    dx /= norm
    dy /= norm
    theta = math.atan2(n[0] * dy - n[1] * dx, n[0] * dx + n[1] * dy)
    limit = HALF_PI * (1.0 - 1e-15)
    theta = max(-limit, min(limit, theta))
    return PhasePoint(r % geom.perimeter, theta)


def mu0_density(geom: StadiumGeometry, x: PhasePoint) -> float:
    """Density of the invariant measure: cos(theta) / (2 (2 pi + 2 ell))."""
    return math.cos(x.theta) / (2.0 * geom.perimeter)


def mu0_of_X(geom: StadiumGeometry) -> float:
    """Exact mu0-measure of the induced set X.

    X is the pair of parallelograms |alpha - 2 theta| < pi/2 (alpha the
    position angle on each arc), so per arc
    int (pi - 2|theta|) cos(theta) dtheta = 4, giving 8 / (2 (2pi + 2ell)).
    """
    return 2.0 / (math.pi + geom.ell)


def mu0_of_X_nominal(geom: StadiumGeometry) -> float:
    """Commonly quoted closed form pi / (2 (pi + ell)).

    Kept as a comparison target for the validation report; it undercounts
    the parallelograms by a factor pi/4 (see mu0_of_X).
    """
    return math.pi / (2.0 * (math.pi + geom.ell))


def kac_mean_return(geom: StadiumGeometry) -> float:
    """Exact mean of the return time phi+ under mu: 1 / mu0(X)."""
    return (math.pi + geom.ell) / 2.0


def kac_mean_return_nominal(geom: StadiumGeometry) -> float:
    """Kac mean implied by the nominal mu0(X): 2 (pi + ell) / pi."""
    return 2.0 * (math.pi + geom.ell) / math.pi


def in_X_array(geom: StadiumGeometry, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Vectorized membership in X (closed form, no stepping)."""
    ell = geom.ell
    rr = np.mod(r, geom.perimeter)
    alpha = np.where(rr <= math.pi, rr - HALF_PI, rr - (math.pi + ell) - HALF_PI)
    on_arc = (rr <= math.pi) | ((rr >= math.pi + ell) & (rr <= TWO_PI + ell))
    return on_arc & (np.abs(alpha - 2.0 * theta) < HALF_PI)
