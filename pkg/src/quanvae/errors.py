"""Exception hierarchy shared by all modules.

Each class carries the process exit code the CLI uses when it escapes.
"""


class QuanvaeError(Exception):
    exit_code = 1


class ConfigError(QuanvaeError):
    """Invalid configuration: bad qubit counts, wires, flags, missing prerequisites."""

    exit_code = 2


class StateError(QuanvaeError):
    """Operation called in the wrong state (no forward cache, checkpoint mismatch)."""

    exit_code = 2


class DataFormatError(QuanvaeError):
    """Malformed input file or out-of-range data."""

    exit_code = 3


class ParseError(DataFormatError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CacheError(DataFormatError):
    pass


class ShapeError(QuanvaeError):
    exit_code = 4


class NumericError(QuanvaeError):
    exit_code = 5
