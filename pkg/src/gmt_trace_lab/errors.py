"""Exception hierarchy shared by all modules.

The CLI maps :class:`ResourceError` to exit code 3 and every other
:class:`GmtError` to exit code 2.
"""


class GmtError(Exception):
    """Base class for all errors raised by this package."""


class SceneError(GmtError, ValueError):
    """Malformed scene description; ``path`` names the offending node."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class DegenerateDomainError(GmtError, ValueError):
    pass


class DomainError(GmtError, ValueError):
    """A point or parameter lies outside the operation's domain of definition."""


class ScaleError(GmtError, ValueError):
    pass


class ResolutionError(GmtError, ValueError):
    pass


class PreconditionError(GmtError, ValueError):
    pass


class UnsupportedOperationError(GmtError, TypeError):
    pass


class ResourceError(GmtError, MemoryError):
    """A configured budget (voxels, iterations) would be exceeded."""
