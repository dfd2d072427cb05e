# for type references to own class
from __future__ import annotations

import math
from typing import Dict

from .errors import ConfigError, ScheduleMismatchError

SUPEREXPONENTIAL = "superexponential"
EXPONENTIAL = "exponential"
SUBEXPONENTIAL = "subexponential"
CUSTOM = "custom"


class RegimeSchedule:
    """
    The speed sequence (a_T) of an out-of-sample guarantee

    Disappointment probabilities are required to decay like exp(-a_T + o(a_T)); the limit of
    a_T / T decides the regime and with it which predictor is optimal.
    """
    family = None
    regime = None

    def a(self, T: int) -> float:
        raise NotImplementedError

    def ratio(self, T: int) -> float:
        """a_T / T, the radius the SVP predictor scales its standard deviation with"""
        return self.a(T) / T

    def kl_radius(self, T: int) -> float:
        raise ScheduleMismatchError(
            f"the KL predictor needs an exponential schedule with a fixed rate r, got {self}"
        )

    def to_spec(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_spec(cls, spec: dict) -> RegimeSchedule:
        """
        Builds a schedule from its config form

        Keyword Arguments
        spec -- {"family": "exponential", "r": 0.1}, {"family": "power_law", "c": 1, "beta": 0.5},
                {"family": "logarithmic", "c": 1}, {"family": "superlinear", "c": 1, "beta": 2}
                or {"family": "table", "values": {"10": 2.0, ...}}

        Return
        RegimeSchedule -- the matching family
        """
        if type(spec) is not dict or 'family' not in spec:
            raise ConfigError(f"a schedule needs a <family> field, got <{spec}>", field='schedule')
        family = spec['family']
        families = {
            ExponentialRate.family: ExponentialRate,
            PowerLaw.family: PowerLaw,
            Logarithmic.family: Logarithmic,
            Superlinear.family: Superlinear,
            CustomTable.family: CustomTable,
        }
        if family not in families:
            raise ConfigError(f"unknown schedule family <{family}>", field='schedule.family')
        parameters = {key: value for key, value in spec.items() if key != 'family'}
        try:
            return families[family](**parameters)
        except TypeError as e:
            raise ConfigError(f"bad parameters for schedule family <{family}>: {e}", field='schedule')

    def __eq__(self, other):
        return type(self) is type(other) and self.to_spec() == other.to_spec()

    def __hash__(self):
        return hash(repr(sorted(self.to_spec().items())))

    def __str__(self):
        parameters = ", ".join(f"{key}={value}" for key, value in self.to_spec().items() if key != 'family')
        return f"{type(self).__name__}({parameters})"

    __repr__ = __str__


def _positive(value, name):
    if type(value) is bool or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ConfigError(f"schedule parameter <{name}> must be a positive number, got <{value}>", field=name)
    return float(value)


class ExponentialRate(RegimeSchedule):
    """a_T = r T"""
    family = "exponential"
    regime = EXPONENTIAL

    def __init__(self, r):
        self.r = _positive(r, 'r')

    def a(self, T):
        return self.r * T

    def ratio(self, T):
        return self.r

    def kl_radius(self, T):
        return self.r

    def to_spec(self):
        return {'family': self.family, 'r': self.r}


class PowerLaw(RegimeSchedule):
    """a_T = c T^beta with 0 < beta < 1"""
    family = "power_law"
    regime = SUBEXPONENTIAL

    def __init__(self, c, beta):
        self.c = _positive(c, 'c')
        self.beta = _positive(beta, 'beta')
        if self.beta >= 1:
            raise ConfigError(f"power_law needs beta < 1, got {beta}; use superlinear for beta > 1", field='beta')

    def a(self, T):
        return self.c * T ** self.beta

    def to_spec(self):
        return {'family': self.family, 'c': self.c, 'beta': self.beta}


class Logarithmic(RegimeSchedule):
    """a_T = c log(1 + T)"""
    family = "logarithmic"
    regime = SUBEXPONENTIAL

    def __init__(self, c):
        self.c = _positive(c, 'c')

    def a(self, T):
        return self.c * math.log1p(T)

    def to_spec(self):
        return {'family': self.family, 'c': self.c}


class Superlinear(RegimeSchedule):
    """a_T = c T^beta with beta > 1, the regime where only the robust predictor keeps up"""
    family = "superlinear"
    regime = SUPEREXPONENTIAL

    def __init__(self, c, beta):
        self.c = _positive(c, 'c')
        self.beta = _positive(beta, 'beta')
        if self.beta <= 1:
            raise ConfigError(f"superlinear needs beta > 1, got {beta}", field='beta')

    def a(self, T):
        return self.c * T ** self.beta

    def to_spec(self):
        return {'family': self.family, 'c': self.c, 'beta': self.beta}


class CustomTable(RegimeSchedule):
    """Explicit a_T values for the sample sizes of an experiment"""
    family = "table"
    regime = CUSTOM

    def __init__(self, values: Dict[int, float]):
        if type(values) is not dict or len(values) == 0:
            raise ConfigError("a table schedule needs a non-empty mapping T -> a_T", field='values')
        table = {}
        for T, a_T in values.items():
            if not f"{T}".isdigit() or int(T) < 1:
                raise ConfigError(f"table schedule keys must be sample sizes >= 1, got <{T}>", field='values')
            table[int(T)] = _positive(a_T, f"values[{T}]")
        previous = 0.0
        for T in sorted(table):
            if table[T] < previous:
                raise ConfigError(f"table schedule must be nondecreasing in T, it drops at T={T}", field='values')
            previous = table[T]
        self.values = table

    def a(self, T):
        if T not in self.values:
            raise ConfigError(f"table schedule has no a_T for T={T}", field='values')
        return self.values[T]

    def to_spec(self):
        return {'family': self.family, 'values': {str(T): self.values[T] for T in sorted(self.values)}}
