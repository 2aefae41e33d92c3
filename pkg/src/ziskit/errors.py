"""Exception hierarchy shared across the toolkit."""


class ZisError(Exception):
    """Base class for all toolkit errors."""


class MissingInput(ZisError):
    """A file declared by the manifest does not exist."""


class ParseError(ZisError):
    """A data file is malformed.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" ({path}" + (f":{line}" if line is not None else "") + ")"
        super().__init__(message + where)


class InvariantViolation(ZisError):
    """Loaded data violates a domain-type invariant."""


class NotFound(ZisError):
    """A named entity (subscenario, device, ...) does not exist."""


class InvalidBand(ZisError):
    """Band-pass edges outside (0, Nyquist) or inverted."""


class UndefinedCorrelation(ZisError):
    """Cross-correlation normalizer is zero (all-zero input)."""


class InsufficientProbe(ZisError):
    """Alignment probe too short for the requested lag range."""


class InsufficientSamples(ZisError):
    """Input shorter than the scheme's minimum length."""


class IncompatibleFingerprints(ZisError):
    """Fingerprints of different lengths cannot be compared."""


class InvalidSplit(ZisError):
    """Fingerprint length not divisible by the sub-fingerprint length."""


class IncompatibleScans(ZisError):
    """Beacon aggregates of different kinds (wifi vs ble)."""


class InvalidPressure(ZisError):
    """Non-positive pressure cannot be converted to altitude."""


class ModelGap(ZisError):
    """Surprisal model has no estimate for the queried hour/partition."""


class DegenerateLabels(ZisError):
    """An operation requiring both classes saw only one."""


class InfeasibleStratification(ZisError):
    """A class has fewer rows than the requested fold count."""


class IncompatibleRow(ZisError):
    """Feature arity does not match the trained model."""
