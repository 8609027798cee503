"""Exception hierarchy shared by all kicktrack modules."""


class KicktrackError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameters(KicktrackError, ValueError):
    pass


class SingularMixing(KicktrackError):
    pass


class NegativeRotorForce(KicktrackError):
    pass


class SingularInertia(KicktrackError):
    pass


class NonFiniteState(KicktrackError):
    pass


class DegenerateThrust(KicktrackError):
    pass


class ParseError(KicktrackError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NonMonotonicFrames(ParseError):
    pass


class EmptyTrack(ParseError):
    pass


class TrackGapTooLong(KicktrackError):
    pass


class DivergedSimulation(KicktrackError):
    """Raised when a run leaves the flight volume or goes non-finite.

    The partial :class:`~kicktrack.simharness.FlightLog` recorded up to the
    failure point is attached as ``log``.
    """

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class LengthMismatch(KicktrackError, ValueError):
    pass


class EmptySeries(KicktrackError, ValueError):
    pass
