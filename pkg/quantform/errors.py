"""Exception hierarchy shared by the library, the CLI and the HTTP front end."""


class QuantformError(Exception):
    """Base class for every error raised on purpose by quantform."""


class SpecError(QuantformError, ValueError):
    """A formation instance violates n >= 2, d_i > 0 or k_i > 0."""


class ConfigError(QuantformError, ValueError):
    """A scenario file or request body cannot be turned into a scenario."""

    def __init__(self, message, source=None, line=None):
        self.message = message
        self.source = source
        self.line = line
        super().__init__(self.__str__())

    def __str__(self):
        where = ''
        if self.source is not None:
            where = f"{self.source}"
            if self.line is not None:
                where += f":{self.line}"
            where += ': '
        elif self.line is not None:
            where = f"line {self.line}: "
        return f"{where}{self.message}"


class BoundaryPointError(QuantformError, ValueError):
    """A quantity that only exists off the discontinuity set was asked for on it."""


class GeometryError(QuantformError, ValueError):
    """The caller claimed an active set that the state does not lie on."""


class SolverError(QuantformError, RuntimeError):
    """The event solver could not continue."""


class EventOverflow(SolverError):
    """More events than the configured cap; signals livelock."""


class LyapunovViolation(SolverError):
    """V increased along a segment, or the decay bound failed on a regular segment."""


class InfeasibleMode(SolverError):
    """No consistent continuation (slide, leave up, leave down) exists at a boundary point."""
