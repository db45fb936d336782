"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
stable contract (2 config, 3 data, 4 numerical).
"""


class AgcError(Exception):
    exit_code = 1


class ConfigError(AgcError, ValueError):
    exit_code = 2


class UnknownKey(ConfigError):
    def __init__(self, name):
        super().__init__(f"unknown configuration key: {name!r}")
        self.name = name


class ConfigTypeError(ConfigError, TypeError):
    pass


class InvalidConfig(ConfigError):
    pass


class DataError(AgcError, ValueError):
    exit_code = 3


class InvalidEdge(DataError):
    pass


class MissingComponent(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class ParseError(DataError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class TooFewPoints(DataError):
    pass


class EmptyGraph(DataError):
    pass


class NumericalError(AgcError, ArithmeticError):
    exit_code = 4


class NumericalFailure(NumericalError):
    def __init__(self, param, message="non-finite gradient"):
        super().__init__(f"{message} in {param!r}")
        self.param = param


class DegenerateDenominator(NumericalError):
    pass


class InfiniteDivergence(NumericalError):
    pass


class EmptyClusterTarget(NumericalError):
    pass
