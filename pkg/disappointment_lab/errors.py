class DisappointmentLabError(Exception):
    exit_code = 1

    def __init__(self, message, **details):
        super(DisappointmentLabError, self).__init__(message)
        self.message = message
        self.details = details

    def to_record(self) -> dict:
        """Machine-readable error record printed by the CLI"""
        record = {"error": type(self).__name__, "message": self.message, "exit_code": self.exit_code}
        for key, value in self.details.items():
            record[key] = value
        return record

    def __str__(self):
        return self.message


class InputError(DisappointmentLabError):
    exit_code = 2


class ComputationError(DisappointmentLabError):
    exit_code = 1


class InvalidDistributionError(InputError):
    pass


class DimensionMismatchError(InputError):
    pass


class DecisionIndexError(InputError):
    pass


class NotInteriorError(InputError):
    pass


class SupportError(InputError):
    pass


class NegativeRadiusError(InputError):
    pass


class ScenarioParseError(InputError):

    def __init__(self, message, line=None, field=None):
        super(ScenarioParseError, self).__init__(message, line=line, field=field)
        self.line = line
        self.field = field


class ScenarioValidationError(InputError):

    def __init__(self, message, invariant):
        super(ScenarioValidationError, self).__init__(message, invariant=invariant)
        self.invariant = invariant


class ConfigError(InputError):

    def __init__(self, message, field=None):
        super(ConfigError, self).__init__(message, field=field)
        self.field = field


class ScheduleMismatchError(InputError):
    pass


class GridDimensionError(InputError):
    pass


class GridTooSmallError(InputError):
    pass


class LatticeTooLargeError(ComputationError):

    def __init__(self, size, cap):
        super(LatticeTooLargeError, self).__init__(
            f"lattice has {size} points which exceeds the cap of {cap}; "
            f"rerun with --method importance or --method mc, or raise --cap",
            size=size, cap=cap, suggested_method="importance"
        )
        self.size = size
        self.cap = cap


class ConvergenceError(ComputationError):

    def __init__(self, message, bracket):
        super(ConvergenceError, self).__init__(message, bracket=list(bracket))
        self.bracket = tuple(bracket)


class EllipsoidConditionError(ComputationError):

    def __init__(self, lhs, rhs):
        super(EllipsoidConditionError, self).__init__(
            f"sqrt(radius) = {lhs} is not below sigma(A) * min_i min(p(i), 1 - p(i)) = {rhs}",
            lhs=lhs, rhs=rhs
        )
        self.lhs = lhs
        self.rhs = rhs


class SingularMatrixError(ComputationError):
    pass


class InvariantViolationError(ComputationError):
    pass
