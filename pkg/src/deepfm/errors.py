"""Exception hierarchy shared by every subsystem."""


class DeepFMError(Exception):
    """Base class for all package errors."""


class MalformedInputError(DeepFMError, ValueError):
    """A raw record does not have the expected shape."""

    def __init__(self, message, line=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.path = path


class ParseError(MalformedInputError):
    """A token could not be parsed into the declared field kind."""


class UnknownTokenError(DeepFMError, KeyError):
    pass


class DimensionError(DeepFMError, ValueError):
    pass


class ParameterError(DeepFMError, ValueError):
    pass


class ConfigurationError(DeepFMError, ValueError):
    pass


class UndefinedMetricError(DeepFMError, ValueError):
    pass


class NumericalError(DeepFMError, ArithmeticError):
    """Training produced a non-finite value."""

    def __init__(self, message, step=None, batch_id=None, tensor=None):
        super().__init__(message)
        self.step = step
        self.batch_id = batch_id
        self.tensor = tensor
