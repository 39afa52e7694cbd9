"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
failures onto its documented exit statuses without string matching.
"""


class AmbiroomError(Exception):
    exit_code = 1


class ConfigError(AmbiroomError, ValueError):
    """Invalid argument, configuration or processor wiring."""

    exit_code = 2


class DimensionError(ConfigError):
    """Shapes or SH orders of two operands do not agree."""


class ChainError(ConfigError):
    """Adjacent processors have incompatible domain contracts."""


class IncompleteSceneError(ConfigError):
    pass


class GeometryError(AmbiroomError, ValueError):
    exit_code = 3


class FormatError(AmbiroomError, ValueError):
    """Malformed container or signal.

    ``offset`` is the byte offset at which parsing failed, if known.
    """

    exit_code = 4

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class MalformedSignalError(FormatError):
    pass


class NumericalError(AmbiroomError, ArithmeticError):
    exit_code = 5


class UnderdeterminedGridError(NumericalError, ValueError):
    pass


class SingularityError(NumericalError, ValueError):
    pass


class IllConditionedError(NumericalError):
    pass
