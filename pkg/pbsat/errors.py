"""
This module contains the exceptions raised by the pbsat package.

"""


class PBSatError(Exception):
    """Base class for every error raised by pbsat."""


class ConfigError(PBSatError):
    """A configuration value is malformed or outside its allowed set."""


class ParseError(PBSatError):
    """
    Malformed input text.

    :param message: What went wrong.
    :param line: The 1-based line number the problem was found on, if known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(PBSatError):
    """A writer was asked to emit something its format cannot express."""


class InstanceError(PBSatError):
    """An instance or constraint violates its structural invariants."""


class ExpansionTooLarge(PBSatError):
    """A clausal expansion would exceed the configured cap."""


class ResolutionError(PBSatError):
    """The premises of a cutting-plane step do not clash on the pivot."""


class ResolutionOverflow(PBSatError):
    """Weight products of a cutting-plane step exceed the configured maximum weight."""


class ConflictAtRoot(PBSatError):
    """A conflict was derived at decision level 0: the instance is unsatisfiable."""


class OracleCapExceeded(PBSatError):
    """The brute-force oracle was asked to enumerate too many variables."""


class VerificationError(PBSatError):
    """A model handed to the verifier does not cover every variable."""
