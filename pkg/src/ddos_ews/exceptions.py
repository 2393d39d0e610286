"""Exception hierarchy shared by every stage of the pipeline."""


class EWSError(Exception):
    """Base class for all errors raised by ddos_ews."""


class BadConfig(EWSError, ValueError):
    pass


# --- ingestion -----------------------------------------------------------

class IngestError(EWSError):
    pass


class UnreadableFile(IngestError):
    pass


class SchemaError(IngestError):
    pass


class NonMonotoneTime(IngestError):
    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"time decreases at row {row}")


class TooManyDestinations(IngestError):
    pass


# --- windowing -----------------------------------------------------------

class EmptyWindow(EWSError):
    pass


# --- indicators ----------------------------------------------------------

class IndicatorUndefined(EWSError):
    """An indicator has no value for the given input.

    Callers that build trajectories turn this into a null value tagged with
    :attr:`reason` rather than dropping the sample.
    """

    @property
    def reason(self):
        return type(self).__name__


class TooShort(IndicatorUndefined):
    pass


class SigmaZero(IndicatorUndefined):
    pass


class ZeroMean(IndicatorUndefined):
    pass


class DegenerateMatrix(IndicatorUndefined):
    pass


class IllConditioned(IndicatorUndefined):
    pass


class TooFewValid(IndicatorUndefined):
    pass


# --- synthesis -----------------------------------------------------------

class BadSpec(EWSError, ValueError):
    pass
