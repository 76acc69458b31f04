"""Exception types shared across the package."""


class CadforgeError(Exception):
    """Base class for all package-specific errors."""


class ProgramSyntaxError(CadforgeError):
    """Raised when program text cannot be tokenized or parsed.

    Carries the 1-based source position and a description of what was
    expected at that point.
    """

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)


class ProgramSemanticError(CadforgeError):
    """Raised when a syntactically valid program violates a semantic rule.

    ``identifier`` names the offending id when one is involved.
    """

    def __init__(self, message, identifier=None):
        self.identifier = identifier
        if identifier is not None:
            message = f"{message} (identifier: {identifier!r})"
        super().__init__(message)


class DegenerateProfileError(CadforgeError):
    """A sketch profile has no usable area (collapsed polygon or similar)."""


class EmptyResultError(CadforgeError):
    """The executed solid is provably or observably empty."""


class EmptyCloudError(CadforgeError):
    """An operation that needs points received an empty cloud."""


class DegenerateCloudError(CadforgeError):
    """A cloud cannot be normalized because all its points coincide."""


class NotNormalizedError(CadforgeError):
    """A metric that requires unit-box input received an unnormalized cloud."""


class FrameMismatchError(CadforgeError):
    """Two occupancy grids disagree in resolution or frame."""


class EmptyListError(CadforgeError):
    """An aggregate was asked to summarize zero values."""


class BudgetExhaustedError(CadforgeError):
    """A retry budget ran out before a valid sample could be produced."""


class TransportError(CadforgeError):
    """A remote call failed at the network or HTTP level."""


class ProtocolError(CadforgeError):
    """A remote endpoint answered with a malformed or unexpected payload."""


class NoViableCandidateError(CadforgeError):
    """Every candidate for a target failed execution or scoring."""


class PolicyMismatchError(CadforgeError):
    """A pair-building routine received a policy it does not handle."""


class BatchTooSmallError(CadforgeError):
    """Batch-ranked pair building needs more selection outcomes."""


class NoTargetsError(CadforgeError):
    """An iteration was asked to run over zero targets."""


class ConfigError(CadforgeError):
    """A run configuration file is missing, malformed, or has unknown keys."""
