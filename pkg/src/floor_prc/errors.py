"""Exception hierarchy; each class maps to one CLI exit code."""


class FloorPrcError(Exception):
    exit_code = 1


class ConfigError(FloorPrcError, ValueError):
    exit_code = 2


class DataError(FloorPrcError, ValueError):
    exit_code = 3


class NumericalError(FloorPrcError, ArithmeticError):
    exit_code = 4
