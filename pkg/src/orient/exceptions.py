"""Exception hierarchy.

Every error raised on bad data derives from :class:`OrientError`, which the
CLI maps to exit code 2.  Most also subclass ``ValueError`` so callers that
only know the standard library still catch them.
"""


class OrientError(Exception):
    """Base class for data errors."""


class DuplicateLabel(OrientError, ValueError):
    pass


class NonFiniteValue(OrientError, ValueError):
    pass


class RaggedMatrix(OrientError, ValueError):
    pass


class EmptyInput(OrientError, ValueError):
    pass


class ReservedLabel(OrientError, ValueError):
    pass


class DimensionMismatch(OrientError, ValueError):
    pass


class ZeroVector(OrientError, ValueError):
    pass


class SizeMismatch(OrientError, ValueError):
    pass


class KTooLarge(OrientError, ValueError):
    pass


class DegenerateSpectrum(OrientError, ValueError):
    pass


class NoResolvableEdges(OrientError, ValueError):
    pass


class AlreadyActive(OrientError, ValueError):
    pass


class NoActiveEntities(OrientError, ValueError):
    pass


class UnknownNode(OrientError, KeyError):
    pass


class NoScorableEdges(OrientError, ValueError):
    pass


class NoScorablePairs(OrientError, ValueError):
    pass


class MalformedLine(OrientError, ValueError):
    def __init__(self, path, lineno, reason):
        self.path = str(path)
        self.lineno = lineno
        self.reason = reason
        super().__init__(f"{path}:{lineno}: {reason}")


class InconsistentDimension(MalformedLine):
    pass


class CountMismatch(OrientError, ValueError):
    pass
