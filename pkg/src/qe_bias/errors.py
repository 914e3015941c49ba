"""Exception hierarchy shared across the harness.

Exit-code mapping used by the CLI: DatasetError and its kin are input
errors (exit 2), EndpointError and subclasses are scorer/translator
failures (exit 3).
"""


class HarnessError(Exception):
    """Base class for all harness-raised errors."""


class DatasetError(HarnessError):
    """Malformed or inconsistent input data (datasets, candidate files, args)."""


class EndpointError(HarnessError):
    """A scorer or translator endpoint failed."""


class ProtocolError(EndpointError):
    """An endpoint violated the wire protocol (bad payload, unknown or duplicate id)."""


class ScoreTimeoutError(EndpointError):
    """Responses missing after timeout or endpoint shutdown.

    Carries the unmatched request ids so callers can report exactly what
    was lost.
    """

    def __init__(self, unmatched_ids, message=None):
        self.unmatched_ids = sorted(unmatched_ids)
        if message is None:
            message = "no response for ids: " + ", ".join(self.unmatched_ids)
        super().__init__(message)


class NotEstimableError(HarnessError):
    """A statistic could not be computed from the given sample."""
