"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class MemmatchError(Exception):
    """Base class for all package errors."""


class InputError(MemmatchError, ValueError):
    """Bad user-supplied data (exit code 1)."""


class ParseError(InputError):
    def __init__(self, message, line=None, position=None):
        self.line = line
        self.position = position
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"position {position}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class FormatError(InputError):
    pass


class DimensionError(MemmatchError, ValueError):
    pass


class DomainError(MemmatchError, ValueError):
    pass


class GraphError(MemmatchError, RuntimeError):
    pass


class NumericError(MemmatchError, ArithmeticError):
    """Non-finite values during training (exit code 2)."""
