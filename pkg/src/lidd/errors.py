"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 2 (usage),
InputFormatError -> 3 (input/format), ContractViolation -> 4 (pipeline
contract violation).
"""


class LiddError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LiddError):
    """A configuration field has an invalid value; message names the field."""


class InputFormatError(LiddError):
    """Input data is unreadable or does not match the declared format."""


class ContractViolation(LiddError):
    """An operation was called with arguments violating its precondition."""
