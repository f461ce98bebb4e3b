"""Exception hierarchy. Each class carries the CLI exit code of its error class."""


class LabError(Exception):
    exit_code = 1


class InvalidArgument(LabError, ValueError):
    exit_code = 2


class ConfigError(InvalidArgument):
    """Configuration could not be parsed or violates a constraint.

    ``problems`` holds one ``(key, line, message)`` triple per offending entry.
    """

    exit_code = 2

    def __init__(self, problems):
        self.problems = list(problems)
        lines = []
        for key, line, msg in self.problems:
            where = f" (line {line})" if line else ""
            lines.append(f"{key}{where}: {msg}")
        super().__init__("; ".join(lines))


class EllipticityViolation(InvalidArgument):
    pass


class UnsupportedGeometry(InvalidArgument):
    pass


class OutOfDomain(InvalidArgument):
    pass


class NumericalBlowup(LabError, FloatingPointError):
    exit_code = 3


class ConvergenceFailure(LabError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, iterations=None, relative_residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.relative_residual = relative_residual


class EigensolverFailure(LabError, ArithmeticError):
    exit_code = 5
