"""Exception hierarchy shared by all hamlag modules."""


class HamlagError(Exception):
    """Base class for all library errors."""


class DimensionError(HamlagError, ValueError):
    pass


class ChartError(HamlagError):
    """A point or a realized Lagrangian left the valid range of its chart."""


class GeometryError(HamlagError):
    """Induced geometry is degenerate (e.g. ill-conditioned induced metric)."""


class NonMinimalError(HamlagError):
    """The Kaehler-Einstein shortcut was requested for a non-minimal submanifold."""


class DegeneracyError(HamlagError):
    """The bordered Newton matrix is singular beyond the declared kernel candidates."""


class ConvergenceError(HamlagError):
    """Newton iteration did not reach tolerance."""
