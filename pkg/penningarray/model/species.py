""" Ion species models """

from __future__ import annotations

import logging

from pydantic import BaseModel, Field

from .constants import ATOMIC_MASS, ELEMENTARY_CHARGE, TWO_PI

from typing import Dict

logger = logging.getLogger(__name__)


class IonSpecies(BaseModel):
    label: str = Field(description="Human readable name, e.g. 9Be+")
    mass: float = Field(gt=0, description="Ion mass, kg")
    charge: float = Field(default=ELEMENTARY_CHARGE, gt=0, description="Ion charge, C")
    cooling_wavelength: float = Field(gt=0, description="Doppler cooling transition wavelength, m")
    natural_linewidth: float = Field(gt=0, description="Cooling transition linewidth, rad/s")

    class Config:
        title = "Ion Species"
        extra = "forbid"
        frozen = True

    @property
    def cooling_wavenumber(self) -> float:
        return TWO_PI / self.cooling_wavelength


# Atomic data for 9Be+ (2s-2p at 313 nm) is external to the trap model and may be edited via the config
BERYLLIUM_9 = IonSpecies(
    label="9Be+",
    mass=9.012 * ATOMIC_MASS,
    charge=ELEMENTARY_CHARGE,
    cooling_wavelength=313e-9,
    natural_linewidth=TWO_PI * 19.4e6,
)

SPECIES_REGISTRY: Dict[str, IonSpecies] = {BERYLLIUM_9.label: BERYLLIUM_9}


def get_species(label: str) -> IonSpecies:
    try:
        return SPECIES_REGISTRY[label]
    except KeyError:
        logger.error(f"Unknown species requested: {label}")
        raise ValueError(f"Species <{label}> is not in the registry, known species: {list(SPECIES_REGISTRY)}")
