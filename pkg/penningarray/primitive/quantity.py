""" Physical quantity primitives """

from __future__ import annotations

import math
import re

from scipy import constants as cons

from typing import ClassVar, Dict

_QUANTITY_RE = re.compile(r"^\s*(?P<value>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(?P<unit>\S.*?)\s*$")


class Quantity(float):
    """Custom pydantic type for a float in SI units parsed from an explicit unit string, e.g. ``"2.1 MHz"``

    Bare numbers are rejected: the unit must always be spelled out.
    """

    dimension: ClassVar[str] = "dimensionless"
    units: ClassVar[Dict[str, float]] = {}

    @classmethod
    def __get_validators__(cls):
        yield cls.validate

    @classmethod
    def __modify_schema__(cls, field_schema):
        field_schema.update(
            type="string",
            pattern=_QUANTITY_RE.pattern,
            description=f"{cls.dimension} with one of the units: {', '.join(cls.units)}",
            examples=[f"1 {next(iter(cls.units))}"],
        )

    @classmethod
    def validate(cls, v):
        if isinstance(v, cls):
            return v

        if not isinstance(v, str):
            raise TypeError(f"{cls.dimension} must be a string with an explicit unit, got <{v!r}>")

        return cls.parse(v)

    @classmethod
    def parse(cls, text: str) -> Quantity:
        match = _QUANTITY_RE.match(text)
        if match is None:
            raise ValueError(f"Can't parse <{text}> as a {cls.dimension} with an explicit unit")

        unit = match.group("unit").replace("µ", "u").replace("μ", "u")
        if unit not in cls.units:
            raise ValueError(f"Unit <{match.group('unit')}> is not a {cls.dimension} unit, use one of {list(cls.units)}")

        return cls(float(match.group("value")) * cls.units[unit])

    @classmethod
    def si(cls, value: float) -> Quantity:
        """Wrap an SI value that is already known to be in base units"""
        return cls(value)

    def __repr__(self):
        return f"{self.__class__.__name__}({float(self)!r})"


class Frequency(Quantity):
    """Angular frequency in rad/s; cycle units (Hz...) are multiplied by 2π"""

    dimension = "frequency"
    units = {
        "Hz": 2 * math.pi,
        "kHz": 2e3 * math.pi,
        "MHz": 2e6 * math.pi,
        "GHz": 2e9 * math.pi,
        "rad/s": 1.0,
        "krad/s": 1e3,
        "Mrad/s": 1e6,
    }


class Length(Quantity):
    dimension = "length"
    units = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "nm": 1e-9}


class MagneticField(Quantity):
    dimension = "magnetic field"
    units = {"T": 1.0, "mT": 1e-3, "G": 1e-4}


class Voltage(Quantity):
    dimension = "voltage"
    units = {"V": 1.0, "mV": 1e-3, "kV": 1e3}


class Angle(Quantity):
    dimension = "angle"
    units = {"rad": 1.0, "mrad": 1e-3, "deg": math.pi / 180}


class Duration(Quantity):
    dimension = "duration"
    units = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}


class Mass(Quantity):
    dimension = "mass"
    units = {"kg": 1.0, "u": cons.atomic_mass, "amu": cons.atomic_mass}


class Wavenumber(Quantity):
    dimension = "wavenumber"
    units = {"rad/m": 1.0, "1/m": 1.0, "rad/um": 1e6, "1/um": 1e6}
