"""Exception types raised across the package."""


class SlapError(Exception):
    """Base class for all package errors."""


class DimensionError(SlapError, ValueError):
    pass


class DegenerateObservationError(SlapError):
    """The state coincides with a landmark, so the bearing is undefined."""


class FilterDivergenceError(SlapError):
    """Every particle likelihood underflowed to zero."""


class DegenerateGeometryError(SlapError, ValueError):
    pass


class NoPathError(SlapError):
    pass


class InfeasibleSeedError(SlapError):
    pass


class DiscretizationError(SlapError):
    pass


class ScenarioError(SlapError, ValueError):
    """Scenario file failed validation. ``path`` names the offending field."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
