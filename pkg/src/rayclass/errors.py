"""Exception hierarchy shared by all rayclass modules."""


class RayClassError(ValueError):
    """Base class for every error raised by rayclass."""


class InvalidDirectionError(RayClassError):
    pass


class InvalidLengthError(RayClassError):
    pass


class InvalidCountError(RayClassError):
    pass


class UnsupportedSchemeError(RayClassError):
    pass


class OutOfBoundsError(RayClassError):
    pass


class ParameterError(RayClassError):
    pass


class ShapeError(RayClassError):
    pass


class SchemaError(RayClassError):
    pass


class ParseError(RayClassError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyDatasetError(RayClassError):
    pass
