"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class SocialLearnError(Exception):
    exit_code = 2


class ParameterError(SocialLearnError, ValueError):
    """An argument violates a documented precondition."""

    exit_code = 2


class UsageError(SocialLearnError):
    """Malformed command line or configuration document."""

    exit_code = 2


class PolicyError(SocialLearnError):
    """The requested decision policy does not cover the graph family."""

    exit_code = 2


class ResourceError(SocialLearnError):
    """Work would exceed a configured memory or enumeration budget."""

    exit_code = 3


class VerificationFailure(SocialLearnError):
    """A verifier ran to completion but its assertion was not met."""

    exit_code = 1


class OutputError(SocialLearnError, OSError):
    """A result file could not be written."""

    exit_code = 3
