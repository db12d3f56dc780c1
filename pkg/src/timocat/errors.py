"""Exception types raised across the package."""


class TimocatError(Exception):
    """Base class for all package errors."""


class ValidationError(TimocatError, ValueError):
    pass


class NonPositiveParameter(ValidationError):
    def __init__(self, name, value=None):
        self.name = name
        self.value = value
        super().__init__(f"parameter {name!r} must be strictly positive (got {value!r})")


class MuZeroWithoutFlag(ValidationError):
    def __init__(self):
        super().__init__("mu = 0 is only accepted with the exploratory flag set")


class NegativeAmplitude(ValidationError):
    pass


class EvaluationFailure(TimocatError):
    pass


class IndexOutOfRange(TimocatError, IndexError):
    pass


class NonFiniteSample(TimocatError, ValueError):
    pass


class BasisMismatch(TimocatError, ValueError):
    pass


class NonConvergence(TimocatError, RuntimeError):
    pass


class CFLViolation(UserWarning):
    """Time step exceeds the advisory RK4 stability bound."""


class MeanModeAbsent(TimocatError, ValueError):
    pass


class TooFewSamples(TimocatError, ValueError):
    pass


class InvalidOrder(TimocatError, ValueError):
    pass


class NonPositiveValues(TimocatError, ValueError):
    pass


class ChainInfeasible(TimocatError, ArithmeticError):
    pass


class MuZero(TimocatError, ValueError):
    def __init__(self):
        super().__init__("decay certificate requires mu > 0")


class EmptyTrajectory(TimocatError, ValueError):
    pass


class NotFound(TimocatError, LookupError):
    pass


class MissingKey(ValidationError, KeyError):
    def __init__(self, name):
        self.name = name
        ValueError.__init__(self, f"missing required key {name!r}")

    def __str__(self):
        return self.args[0]


class ConfigTypeError(ValidationError, TypeError):
    def __init__(self, name, raw):
        self.name = name
        ValueError.__init__(self, f"key {name!r} has invalid value {raw!r}")
