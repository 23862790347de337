"""Exception hierarchy.

Validation problems (bad arguments, inconsistent configs, malformed wire
messages) and numerical problems (non-convergent quadrature, singular
solves) are kept apart because the command line maps them to different
exit codes.
"""


class ValidationError(ValueError):
    """Inputs violate a documented precondition."""


class ConfigError(ValidationError):
    """Scenario configuration is malformed or inconsistent."""


class AlignmentError(ValidationError):
    """A shift step does not admit the structured folded observation."""


class UnsupportedRegimeError(ValidationError):
    """Parameters fall outside the regime the aligning theory covers."""


class ProtocolError(ValidationError):
    """A signalling message cannot be decoded."""


class MetricError(ValidationError):
    """A quality metric is undefined for the given inputs."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or hit a singular system."""
