"""Exception types shared across the package."""


class StadiumError(Exception):
    """Base class for all package-specific errors."""


class GeometryDegenerate(StadiumError):
    """A collision landed tangentially (|cos theta| below tolerance).

    Grazing collisions form a measure-zero set; hitting one in double
    precision indicates a handpicked initial condition.
    """


class CapExceeded(StadiumError):
    """A bounce/slide run exceeded the iteration cap.

    Signals proximity to the measure-zero period-2 vertical orbits (or a
    perfectly grazing slide).
    """


class ZeroI(StadiumError):
    """Operation requires a nonzero perpendicular average I."""


class InsufficientSignal(StadiumError):
    """The requested statistic is undefined for this observable (I = 0)."""


class InsufficientSamples(StadiumError):
    """Confidence interval wider than the requested precision."""


class DomainTooSmall(StadiumError):
    """Argument below the smallest value for which the operation is defined."""


class Unreachable(StadiumError):
    """The requested conditional set is empty for these parameters."""
