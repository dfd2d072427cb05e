import math

import pytest

from disappointment_lab.customFields import BooleanField, ExtendedRealField, VectorField, extendedreal
from disappointment_lab.errors import ConfigError


def test_extendedreal_text_forms():
    assert extendedreal(0.1).as_text() == "0.1"
    assert extendedreal.negative_infinity().as_text() == "-inf"
    assert extendedreal.positive_infinity().as_text() == "inf"
    assert extendedreal.from_text("-inf") == -math.inf
    assert extendedreal.from_text(" 0.25 ") == 0.25
    with pytest.raises(ValueError):
        extendedreal(math.nan).as_text()


def test_real_field():
    field = ExtendedRealField()
    assert field.to_csv(None) == ""
    assert field.to_csv(1 / 3) == repr(1 / 3)
    assert field.to_csv(-math.inf) == "-inf"
    assert field.to_json(-math.inf) == "-inf"
    assert field.to_json(0.5) == 0.5
    assert field.from_input("inf", 'rate') == math.inf
    assert field.from_input("", 'rate') is None
    with pytest.raises(ConfigError):
        field.from_input("fast", 'rate')
    with pytest.raises(ConfigError):
        field.from_input(True, 'rate')


def test_vector_field():
    field = VectorField()
    assert field.to_csv([0.4, 0.6]) == "0.4;0.6"
    assert field.to_json([0.4, 0.6]) == [0.4, 0.6]
    assert field.from_input("0.4;0.6", 'weights') == [0.4, 0.6]
    assert field.to_csv(None) == ""


def test_boolean_field():
    field = BooleanField()
    assert field.to_csv(True) == "true"
    assert field.to_csv(False) == "false"
    assert field.to_csv(None) == ""
    assert field.to_json(False) is False
