""" Closed-form single-site and pairwise relations """

from __future__ import annotations

import enum
import logging
import math

from pydantic import BaseModel, Field, root_validator

from ..error.error import InstabilityError
from .constants import K_E
from .species import IonSpecies
from .trap import PairGeometry

from typing import Dict

logger = logging.getLogger(__name__)


@enum.unique
class ExchangeKind(str, enum.Enum):
    AXIAL = "axial"
    RADIAL = "radial"


class SingleSiteFrequencies(BaseModel):
    omega_c: float = Field(ge=0)
    omega_1: float = Field(ge=0)
    omega_plus: float = Field(ge=0)
    omega_minus: float = Field(ge=0)
    omega_z: float = Field(gt=0)

    class Config:
        frozen = True

    @root_validator
    def plus_must_not_be_below_minus(cls, values):
        if values.get("omega_plus", 0) < values.get("omega_minus", 0):
            raise ValueError("Modified cyclotron frequency must not be below the magnetron frequency")
        return values

    @property
    def band_gaps(self) -> Dict[str, float]:
        """Gaps between the single-site branches, rad/s"""
        return {
            "cyclotron_axial": self.omega_plus - self.omega_z,
            "axial_magnetron": self.omega_z - self.omega_minus,
            "cyclotron_magnetron": self.omega_1,
        }

    @property
    def magnetron_ratio(self) -> float:
        """omega_minus / omega_z, 0.29 when omega_c = 2 omega_z"""
        return self.omega_minus / self.omega_z


class DipolarTerm(BaseModel):
    k_factor: float
    exchange_frequency: float = Field(description="Omega_ex for the branch, rad/s")
    hop_rate: float = Field(description="(1/2) Omega_ex K, rad/s")

    class Config:
        frozen = True


def bare_cyclotron(species: IonSpecies, b0: float) -> float:
    if b0 < 0:
        raise ValueError(f"Field magnitude must be non-negative, got <{b0}>")
    return species.charge * b0 / species.mass


def single_site_frequencies(species: IonSpecies, b0: float, omega_z: float) -> SingleSiteFrequencies:
    if omega_z <= 0:
        raise ValueError(f"Axial frequency must be positive, got <{omega_z}>")

    omega_c = bare_cyclotron(species, b0)
    disc = omega_c**2 - 2 * omega_z**2
    if disc < 0:
        raise InstabilityError(
            ext_message=f"omega_z = {omega_z:.6g} rad/s exceeds omega_c/sqrt(2) = {omega_c / math.sqrt(2):.6g} rad/s",
            data={"omega_c": omega_c, "omega_z": omega_z},
        )

    omega_1 = math.sqrt(disc)
    omega_plus = 0.5 * (omega_c + omega_1)
    # omega_c - omega_plus keeps omega_plus + omega_minus = omega_c exact
    omega_minus = omega_c - omega_plus

    return SingleSiteFrequencies(
        omega_c=omega_c, omega_1=omega_1, omega_plus=omega_plus, omega_minus=omega_minus, omega_z=omega_z
    )


def exchange_frequency(
    species: IonSpecies, mode_kind: ExchangeKind | str, omega_z: float, omega_1: float, separation: float
) -> float:
    """e^2 / (4 pi eps0 m omega' R^3) with omega' = omega_z (axial) or omega_1 (radial)"""

    if separation <= 0:
        raise ValueError(f"Separation must be positive, got <{separation}>")

    match ExchangeKind(mode_kind):
        case ExchangeKind.AXIAL:
            omega = omega_z
        case ExchangeKind.RADIAL:
            if not math.isfinite(omega_1) or omega_1 <= 0:
                raise InstabilityError(ext_message=f"omega_1 = {omega_1} is not a real positive frequency")
            omega = omega_1

    if omega <= 0:
        raise ValueError(f"Exchange denominator frequency must be positive, got <{omega}>")

    return K_E * species.charge**2 / (species.mass * omega * separation**3)


def dipolar_coupling(pair: PairGeometry, freqs: SingleSiteFrequencies, species: IonSpecies) -> Dict[str, DipolarTerm]:
    """Dipolar hopping terms for the axial (z) and radial (+, -) branches of a pair

    K_z = -K_+ = -K_- = 1 - 3 cos^2(theta). Hop rates carry the 1/2 that makes the symmetric /
    antisymmetric splitting equal Omega_ex |K|, as obtained by diagonalizing the Coulomb Hessian.
    """

    k_z = 1 - 3 * math.cos(pair.polar) ** 2
    omega_ax = exchange_frequency(species, ExchangeKind.AXIAL, freqs.omega_z, freqs.omega_1, pair.separation)
    omega_rad = exchange_frequency(species, ExchangeKind.RADIAL, freqs.omega_z, freqs.omega_1, pair.separation)

    return {
        "z": DipolarTerm(k_factor=k_z, exchange_frequency=omega_ax, hop_rate=0.5 * omega_ax * k_z),
        "+": DipolarTerm(k_factor=-k_z, exchange_frequency=omega_rad, hop_rate=-0.5 * omega_rad * k_z),
        "-": DipolarTerm(k_factor=-k_z, exchange_frequency=omega_rad, hop_rate=-0.5 * omega_rad * k_z),
    }


def mathieu_q(species: IonSpecies, phi0: float, h: float, omega_rf: float) -> float:
    """q_z = -4 e phi0 / (m Omega^2 h^2)"""
    if h <= 0 or omega_rf <= 0:
        raise ValueError("Length scale and drive frequency must be positive")
    return -4 * species.charge * phi0 / (species.mass * omega_rf**2 * h**2)


def pseudopotential_comparison(q_z: float) -> float:
    """Pseudopotential curvature relative to a static quadrupole of the same electrodes: sqrt(3)|q_z|/8"""
    return math.sqrt(3) * abs(q_z) / 8


# ||Hess(phi)||_F = sqrt(3/2) m omega_z^2 / e for the symmetric quadrupole
_FROBENIUS_FACTOR = math.sqrt(1.5)


def curvature_to_axial_frequency(kappa: float, voltage: float, h: float, species: IonSpecies) -> float:
    """Axial frequency for the dimensionless curvature kappa = ||Phi''|| h^2 / V (Frobenius norm)"""
    if kappa <= 0 or voltage <= 0 or h <= 0:
        raise ValueError("Curvature, voltage and length scale must be positive")
    return math.sqrt(species.charge * kappa * voltage / (_FROBENIUS_FACTOR * species.mass * h**2))


def axial_frequency_to_curvature(omega_z: float, voltage: float, h: float, species: IonSpecies) -> float:
    if omega_z <= 0 or voltage <= 0 or h <= 0:
        raise ValueError("Frequency, voltage and length scale must be positive")
    return _FROBENIUS_FACTOR * species.mass * omega_z**2 * h**2 / (species.charge * voltage)


def rf_power(r_wire: float, capacitance: float, v_rf: float, omega_rf: float) -> float:
    """Power dissipated driving a capacitive electrode through a resistive lead: R C^2 V^2 Omega^2 / 2"""
    if min(r_wire, capacitance, v_rf, omega_rf) < 0:
        raise ValueError("RF power inputs must be non-negative")
    return 0.5 * r_wire * capacitance**2 * v_rf**2 * omega_rf**2
