import math
import re

from .errors import ConfigError

POSITIVE_INFINITY_SENTINEL = "inf"
NEGATIVE_INFINITY_SENTINEL = "-inf"


class extendedreal(float):
    """
    A float that knows how to render itself in result files

    Creating a finite value
    extendedreal(0.25)

    Creating the infinities used for rates of events that never happen
    extendedreal.negative_infinity()
    extendedreal.positive_infinity()

    Parsing a value read back from a CSV or JSON result file
    extendedreal.from_text("-inf")
    """

    @property
    def is_finite(self):
        return math.isfinite(self)

    @classmethod
    def negative_infinity(cls):
        return cls(-math.inf)

    @classmethod
    def positive_infinity(cls):
        return cls(math.inf)

    @classmethod
    def from_text(cls, text):
        """
        Parses the textual form written by ExtendedRealField

        Keyword Arguments
        text -- "inf", "-inf" or any float literal

        Return
        extendedreal -- the parsed value
        """
        if type(text) is not str:
            return cls(text)
        text = text.strip()
        if text == POSITIVE_INFINITY_SENTINEL:
            return cls.positive_infinity()
        if text == NEGATIVE_INFINITY_SENTINEL:
            return cls.negative_infinity()
        return cls(float(text))

    def as_text(self):
        if math.isnan(self):
            raise ValueError("NaN has no textual form in result files")
        if self == math.inf:
            return POSITIVE_INFINITY_SENTINEL
        if self == -math.inf:
            return NEGATIVE_INFINITY_SENTINEL
        # repr is the shortest round-trip form
        return repr(float(self))


def isfloat(num):
    try:
        float(num)
        return True
    except (ValueError, TypeError):
        return False


class ExtendedRealField:

    def to_csv(self, value):
        """
        Renders the value for a CSV cell, None becomes an empty cell
        """
        if value is None:
            return ""
        return extendedreal(value).as_text()

    def to_json(self, value):
        if value is None:
            return None
        value = extendedreal(value)
        if not value.is_finite:
            return value.as_text()
        return float(value)

    def from_input(self, value, field_name):
        """
        Converts a value read from a config or result file back to an extendedreal
        """
        if value is None:
            return None
        if type(value) is str and value.strip() == "":
            return None
        if type(value) is bool or not (isfloat(value) or value in (POSITIVE_INFINITY_SENTINEL,
                                                                     NEGATIVE_INFINITY_SENTINEL)):
            raise ConfigError(f"field <{field_name}> expects a real number, got <{value}>", field=field_name)
        return extendedreal.from_text(value)


class VectorField:
    separator = ";"

    def __init__(self):
        self.element_field = ExtendedRealField()

    def to_csv(self, values):
        if values is None:
            return ""
        return self.separator.join(self.element_field.to_csv(value) for value in values)

    def to_json(self, values):
        if values is None:
            return None
        return [self.element_field.to_json(value) for value in values]

    def from_input(self, value, field_name):
        if value is None or (type(value) is str and value.strip() == ""):
            return None
        if type(value) is str:
            value = [token for token in re.split(r"[;,\s]+", value.strip()) if token != ""]
        return [self.element_field.from_input(element, field_name) for element in value]


class BooleanField:

    def to_csv(self, value):
        if value is None:
            return ""
        return "true" if value else "false"

    def to_json(self, value):
        return value
