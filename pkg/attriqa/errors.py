"""Exception hierarchy. Each family maps to one CLI exit code."""


class AttriqaError(Exception):
    exit_code = 1


class ConfigError(AttriqaError):
    exit_code = 2


class DataError(AttriqaError):
    exit_code = 3


class NumericalError(AttriqaError):
    exit_code = 4


class ShapeError(ConfigError):
    def __init__(self, message: str, *shapes):
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)
        self.shapes = shapes


class GraphStateError(ConfigError):
    pass


class UnknownDistortion(DataError):
    pass


class DuplicateDistortion(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None, path=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}: "
        elif where:
            where = f"{where} "
        super().__init__(f"{where}{message}")
        self.line = line
        self.path = path


class SchemaError(DataError):
    pass


class DegenerateInput(DataError):
    pass


class KernelNumericalError(NumericalError):
    pass


class InvariantError(NumericalError):
    pass
