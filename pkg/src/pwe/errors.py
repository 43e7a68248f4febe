"""Exception hierarchy shared by all pwe modules."""


class PweError(Exception):
    """Base class for every error raised by this package."""


# geometry
class GeometryError(PweError):
    pass


class ZeroAreaSurface(GeometryError):
    pass


class SideLengthNonPositive(GeometryError):
    pass


class DegeneratePoints(GeometryError):
    pass


# em functions
class EmError(PweError):
    pass


class MismatchedCellCount(EmError):
    pass


class EmptyFunctionList(EmError):
    pass


class UnknownFunction(EmError, KeyError):
    pass


class UnknownPort(EmError, KeyError):
    pass


# graph / channel
class GraphError(PweError):
    pass


class DuplicateId(GraphError):
    pass


class MissingCodebook(GraphError):
    pass


class UnknownUser(GraphError, KeyError):
    pass


class InvalidConfiguration(GraphError):
    pass


class EmptyProfile(PweError):
    pass


# optimizers
class UnknownMetric(PweError):
    pass


class NoFeasiblePath(PweError):
    def __init__(self, pair, reason: str = ""):
        self.pair = pair
        super().__init__(f"no feasible path for {pair}" + (f": {reason}" if reason else ""))


class NoArrivals(PweError):
    pass


class EmptyWallRoute(PweError):
    pass


# scheduler
class SchedulerError(PweError):
    pass


class UnknownEndpoint(SchedulerError):
    pass


class RoundsNonPositive(SchedulerError):
    pass


class Infeasible(SchedulerError):
    pass


class LimitExceeded(SchedulerError):
    pass


class NoFeasibleSample(SchedulerError):
    pass


# simulation / interfaces
class TimeOutOfRange(PweError):
    pass


class EmptySeries(PweError):
    pass


class ScenarioInvalid(PweError):
    """Raised with a list of ``(location, message)`` diagnostics."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{loc}: {msg}" for loc, msg in self.errors)
        super().__init__(f"invalid scenario: {lines}")


class ScenarioParseError(PweError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
