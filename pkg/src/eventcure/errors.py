"""Exception hierarchy.

Everything raised on bad data or bad configuration derives from
``EventCureError`` so callers (the CLI in particular) can map it to an exit
code without catching unrelated bugs.
"""


class EventCureError(Exception):
    """Base class for data, model and configuration errors."""


class ConfigError(EventCureError, ValueError):
    pass


class ParseError(EventCureError):
    def __init__(self, message, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DimensionMismatch(EventCureError, ValueError):
    pass


class UnknownLabel(EventCureError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NoSurvivingLabel(EventCureError):
    pass


class NoWorkers(EventCureError):
    pass


class NoOverlap(EventCureError):
    pass


class DegenerateCovariance(EventCureError):
    pass


class EmptySplit(EventCureError):
    pass


class EmptyAlbum(EventCureError, ValueError):
    pass


class MissingGroundTruth(EventCureError):
    pass


class InvalidMargins(EventCureError, ValueError):
    pass


class AllZeroImportance(EventCureError, ValueError):
    pass


class EmptyGrid(EventCureError, ValueError):
    pass


class LengthMismatch(EventCureError, ValueError):
    pass


class AllDropped(EventCureError, ValueError):
    pass


class InvariantViolation(Exception):
    """An internal consistency check failed; indicates a bug, not bad input."""
