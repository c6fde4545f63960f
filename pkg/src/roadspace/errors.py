"""Exception types shared across the package."""


class RoadspaceError(Exception):
    """Base class for errors raised by this package."""


class NoPlaneFound(RoadspaceError):
    """Plane search finished without a cell reaching the inlier threshold."""


class ModelUnderdetermined(RoadspaceError):
    """Too few bootstrap pixels to build a color model."""


class InvariantError(RoadspaceError):
    """An internal consistency check failed."""
