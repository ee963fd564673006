from penningarray.primitive.quantity import Angle, Duration, Frequency, Length, MagneticField, Mass, Quantity

import math

import pytest
from pydantic import BaseModel, ValidationError
from scipy import constants as cons


class MockModel(BaseModel):
    omega: Frequency
    spacing: Length
    field: MagneticField


class TestQuantity:
    def test_parse(self):
        assert Frequency.parse("2.1 MHz") == pytest.approx(2 * math.pi * 2.1e6)
        assert Frequency.parse("1e6 rad/s") == pytest.approx(1e6)
        assert Length.parse("15 um") == pytest.approx(15e-6)
        assert Length.parse("15µm") == pytest.approx(15e-6)
        assert Length.parse("15 μm") == pytest.approx(15e-6)
        assert Angle.parse("90 deg") == pytest.approx(math.pi / 2)
        assert Duration.parse("16 us") == pytest.approx(16e-6)
        assert Mass.parse("9.012 u") == pytest.approx(9.012 * cons.atomic_mass)
        assert MagneticField.parse("-2.5 T") == pytest.approx(-2.5)

    def test_bad_units(self):
        with pytest.raises(ValueError, match=r".*not a frequency unit.*"):
            Frequency.parse("2.1 m")

        with pytest.raises(ValueError, match=r"Can't parse.*"):
            Length.parse("fifteen um")

    def test_model(self):
        model = MockModel.parse_obj({"omega": "2.55 MHz", "spacing": "30 um", "field": "2.2 T"})

        assert isinstance(model.omega, Frequency)
        assert model.omega == pytest.approx(2 * math.pi * 2.55e6)
        assert model.spacing == pytest.approx(30e-6)
        assert model.field == pytest.approx(2.2)
        assert repr(model.field) == "MagneticField(2.2)"

        # instances pass through unchanged
        again = MockModel(omega=model.omega, spacing=model.spacing, field=model.field)
        assert again == model

    def test_bare_numbers_rejected(self):
        with pytest.raises(ValidationError) as err:
            MockModel.parse_obj({"omega": 2.55e6, "spacing": "30 um", "field": "2.2 T"})
        assert "explicit unit" in str(err.value)

    def test_schema(self):
        schema = MockModel.schema()["properties"]["omega"]
        assert schema["type"] == "string"
        assert "MHz" in schema["description"]

    def test_si(self):
        assert Length.si(1e-6) == 1e-6
        assert isinstance(Length.si(1e-6), Quantity)
