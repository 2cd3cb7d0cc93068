"""Exception hierarchy shared by every flexvrp module."""


class FlexVrpError(Exception):
    """Base class for all errors raised by flexvrp."""


class InvalidInstance(FlexVrpError):
    pass


class InvalidDiscount(FlexVrpError):
    pass


class NotOptimal(FlexVrpError):
    """A flexibility value is not a best response to the offered discount."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class Unreachable(FlexVrpError):
    pass


class ModelError(FlexVrpError):
    pass


class NumericalFailure(FlexVrpError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class LimitReached(FlexVrpError):
    """A node, time or iteration cap was hit before optimality was proven."""

    def __init__(self, message, incumbent=None, bound=None, trace=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.bound = bound
        self.trace = trace


class InternalError(FlexVrpError):
    pass


class NotACut(FlexVrpError):
    pass


class TooLarge(FlexVrpError):
    pass


class ParseError(FlexVrpError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(FlexVrpError):
    pass
