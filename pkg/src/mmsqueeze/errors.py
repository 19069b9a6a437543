"""Exception hierarchy shared by all modules.

Each class carries the process exit code the command-line front end maps it to.
"""


class SqueezeError(Exception):
    exit_code = 1


class InvalidParameterError(SqueezeError, ValueError):
    exit_code = 2


class DomainError(SqueezeError, ValueError):
    exit_code = 2


class ConfigurationError(SqueezeError, ValueError):
    exit_code = 2


class InfeasibleTargetError(SqueezeError, ValueError):
    exit_code = 3


class IncompleteDatasetError(SqueezeError, ValueError):
    exit_code = 4

    def __init__(self, missing):
        self.missing = sorted(tuple(p) for p in missing)
        listed = ", ".join(f"({i},{j})" for i, j in self.missing)
        super().__init__(f"dataset is missing pair measurements: {listed}")


class InvalidProjectionError(SqueezeError, ValueError):
    exit_code = 2


class NumericalError(SqueezeError, ArithmeticError):
    exit_code = 5
