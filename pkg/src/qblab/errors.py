"""Error taxonomy shared by the library, the service and the CLI.

Exit codes are part of the CLI contract: 0 success, 1 usage, 2 bad or
missing data, 3 numeric failure.
"""


class QblabError(Exception):
    """Base class for errors that map to a CLI exit code."""

    exit_code = 1


class UsageError(QblabError):
    """Malformed flags, parameters or configuration values."""

    exit_code = 1


class DataError(QblabError):
    """Missing files, malformed files or inconsistent inputs."""

    exit_code = 2


class NumericError(QblabError):
    """Non-finite values where finite math was required (e.g. diverged loss)."""

    exit_code = 3
