"""Exception hierarchy shared by every robinkit module.

Each class carries the process exit code the command line front end uses
when the error escapes to the top level.
"""


class RobinKitError(Exception):
    exit_code = 2


class InvalidArgumentError(RobinKitError, ValueError):
    exit_code = 2


class DomainError(RobinKitError, ValueError):
    """An operand lies outside the domain of an operation (log of a
    non-positive interval, n <= 5040 for a theorem-level check, ...)."""

    exit_code = 2


class PrecisionError(RobinKitError, ArithmeticError):
    """A certified comparison stayed undecided at the maximum precision."""

    exit_code = 3

    def __init__(self, message, required_digits=None):
        super().__init__(message)
        self.required_digits = required_digits


class CapacityError(RobinKitError):
    """A configured resource cap would be exceeded.

    ``token`` is an opaque resumption marker when partial output was flushed.
    """

    exit_code = 4

    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token


class CheckpointError(RobinKitError, OSError):
    exit_code = 4
