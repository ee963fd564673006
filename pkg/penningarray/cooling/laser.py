""" Doppler cooling beam and axialization drive """

from __future__ import annotations

import logging
import math

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from ..equilibrium.equilibrium import solve_equilibrium
from ..model.constants import ELEMENTARY_CHARGE, HBAR
from ..model.species import IonSpecies
from ..model.trap import ArrayConfig, TrapSite
from ..modes.modes import ModeKind, compute_modes

logger = logging.getLogger(__name__)

# length normalizing the site potential scale phi_0 = kappa_axial * h^2 / 2
DEFAULT_LENGTH_SCALE = 30e-6


class LaserParams(BaseModel):
    k_vector: np.ndarray = Field(description="Beam wavevector, rad/m")
    detuning: float = Field(description="Laser detuning from the rest-frame resonance, rad/s")
    saturation: float = Field(ge=0, description="Saturation parameter s = I / I_sat")
    linewidth: float = Field(gt=0, description="Natural linewidth Gamma, rad/s")
    wavelength: float = Field(gt=0, description="Transition wavelength, m")

    class Config:
        title = "Cooling Laser"
        frozen = True
        arbitrary_types_allowed = True

    @validator("k_vector", pre=True)
    def k_vector_must_be_3_vector(cls, v):
        arr = np.asarray(v, dtype=float)
        if arr.shape != (3,) or not np.all(np.isfinite(arr)):
            raise ValueError(f"Wavevector must be a finite 3-vector, got <{v}>")
        return arr

    @root_validator(skip_on_failure=True)
    def k_norm_must_match_wavelength(cls, values):
        k = float(np.linalg.norm(values["k_vector"]))
        expected = 2 * math.pi / values["wavelength"]
        if not math.isclose(k, expected, rel_tol=1e-9):
            raise ValueError(f"|k| = <{k:.6g}> rad/m does not match 2 pi / wavelength = <{expected:.6g}> rad/m")
        return values

    @classmethod
    def for_species(
        cls,
        species: IonSpecies,
        direction,
        detuning: float | None = None,
        saturation: float = 8.0,
    ) -> LaserParams:
        """Beam on the species cooling transition; detuning defaults to -Gamma/2"""

        direction = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ValueError("Beam direction must be nonzero")

        return cls(
            k_vector=species.cooling_wavenumber * direction / norm,
            detuning=-species.natural_linewidth / 2 if detuning is None else detuning,
            saturation=saturation,
            linewidth=species.natural_linewidth,
            wavelength=species.cooling_wavelength,
        )

    @property
    def enabled(self) -> bool:
        return self.saturation > 0

    @property
    def wavenumber(self) -> float:
        return float(np.linalg.norm(self.k_vector))

    @property
    def photon_momentum(self) -> np.ndarray:
        """hbar k along the beam, kg m/s"""
        return HBAR * self.k_vector


def scattering_rate(laser: LaserParams, velocity) -> float | np.ndarray:
    """Two-level scattering rate for an ion moving with ``velocity`` (last axis of length 3), 1/s"""

    velocity = np.asarray(velocity, dtype=float)
    effective = laser.detuning - velocity @ laser.k_vector
    half_width = laser.linewidth / 2
    return half_width * laser.saturation / (1 + laser.saturation + (effective / half_width) ** 2)


class AxializationParams(BaseModel):
    amplitude: float = Field(ge=0, description="Drive amplitude phi_ax, V")
    drive_frequency: float = Field(ge=0, description="Drive frequency, rad/s")
    length_scale: float = Field(default=DEFAULT_LENGTH_SCALE, gt=0, description="Length h normalizing phi_ax, m")

    class Config:
        title = "Axialization Drive"
        frozen = True

    @classmethod
    def from_fraction(
        cls,
        fraction: float,
        config: ArrayConfig,
        drive_frequency: float | None = None,
        length_scale: float = DEFAULT_LENGTH_SCALE,
    ) -> AxializationParams:
        """Drive with phi_ax = fraction * phi_0 of the first site, at omega_+ + omega_- unless given"""

        if fraction < 0:
            raise ValueError(f"Axialization fraction must not be negative, got <{fraction}>")

        phi0 = 0.5 * config.sites[0].axial_curvature * config.site_overrides.get(0, 1.0) * length_scale**2
        if drive_frequency is None:
            drive_frequency = default_drive_frequency(config)

        return cls(amplitude=fraction * phi0, drive_frequency=drive_frequency, length_scale=length_scale)

    @property
    def enabled(self) -> bool:
        return self.amplitude > 0

    @property
    def curvature(self) -> float:
        """Peak curvature of the drive potential along the site radial axes, V/m^2"""
        return 2 * self.amplitude / self.length_scale**2


def default_drive_frequency(config: ArrayConfig) -> float:
    """omega_+ + omega_- of an isolated ion at the first site, including any field tilt"""

    single = ArrayConfig(
        species=config.species_at(0),
        b_field=config.b_field,
        tilt=config.tilt,
        sites=config.sites[:1],
        site_overrides={0: config.site_overrides[0]} if 0 in config.site_overrides else {},
    )
    eq = solve_equilibrium(single)
    _, modeset = compute_modes(single, eq.positions)

    drive = sum(modeset.by_kind(kind)[0].omega for kind in (ModeKind.CYCLOTRON, ModeKind.MAGNETRON))
    logger.debug(f"Axialization drive defaults to {drive / (2 * math.pi):.6g} Hz")
    return drive


def _radial_projector(site: TrapSite) -> np.ndarray:
    e1, e2, _ = site.frame
    return np.outer(e1, e1) - np.outer(e2, e2)


def axialization_force(
    axial: AxializationParams,
    site: TrapSite,
    position,
    t: float,
    charge: float = ELEMENTARY_CHARGE,
) -> np.ndarray:
    """-e grad[phi_ax (x'^2 - y'^2) / h^2] cos(omega_d t) with x', y' along the site radial axes, N"""

    offset = np.asarray(position, dtype=float) - site.center
    return -charge * axial.curvature * math.cos(axial.drive_frequency * t) * (_radial_projector(site) @ offset)


def axialization_matrix(axial: AxializationParams, config: ArrayConfig) -> np.ndarray:
    """G with F(q, t) = cos(omega_d t) G (r - c) in the [x1..xN, y1..yN, z1..zN] order"""

    n = config.n_ions
    matrix = np.zeros((3 * n, 3 * n))
    for j, site in enumerate(config.sites):
        block = -config.charge * axial.curvature * _radial_projector(site)
        idx = j + n * np.arange(3)
        matrix[np.ix_(idx, idx)] = block
    return matrix
