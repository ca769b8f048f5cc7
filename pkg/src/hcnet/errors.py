"""Exception types shared by every hcnet module."""


class HcnetError(Exception):
    pass


class DimensionError(HcnetError, ValueError):
    """Operand shapes do not agree."""


class ConfigError(HcnetError, ValueError):
    pass


class InputError(HcnetError, ValueError):
    """Input values violate an operation's preconditions."""


class NumericError(HcnetError, ArithmeticError):
    pass


class FormatError(HcnetError, ValueError):
    """Malformed on-disk data. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
