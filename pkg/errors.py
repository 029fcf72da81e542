"""
Exception hierarchy for perctrunc

Every error raised on purpose by the toolkit derives from PercTruncError.
The command line maps each family to an exit code.
"""


class PercTruncError(Exception):
    """Base class for toolkit errors"""

    exit_code = 1


class DomainError(PercTruncError, ValueError):
    """A parameter lies outside the domain of the operation"""

    exit_code = 2


class SequenceSpecError(DomainError):
    """Malformed sequence spec string or table contents"""


class ContractViolation(DomainError):
    """Caller broke an input contract, e.g. passed a non-canonical edge"""


class UnsatisfiableParameters(PercTruncError):
    """A parameter search found no admissible value within its horizon"""

    exit_code = 3


class ResultFileError(PercTruncError):
    """A result file (CSV or JSON) could not be read back"""

    exit_code = 4


class InvariantViolation(PercTruncError, AssertionError):
    """An internal invariant failed; this is always a bug"""

    exit_code = 1
