""" Run configuration """

from __future__ import annotations

import hashlib
import logging
import math

import numpy as np
import yaml
from pydantic import BaseModel, BaseSettings, Field, ValidationError, root_validator, validator

from ..cooling.cooling import Integrator
from ..cooling.laser import DEFAULT_LENGTH_SCALE
from ..equilibrium.equilibrium import DEFAULT_MAX_ITERATIONS
from ..error.error import ConfigError
from ..gates.gates import DEFAULT_RESONANCE_GUARD
from ..model.analytics import bare_cyclotron, curvature_to_axial_frequency
from ..model.constants import ELEMENTARY_CHARGE, TWO_PI
from ..model.lattice import build_lattice
from ..model.species import BERYLLIUM_9, IonSpecies, get_species
from ..model.trap import ArrayConfig
from ..modes.modes import DEFAULT_STABILITY_TOL, ModeKind
from ..primitive.quantity import Angle, Duration, Frequency, Length, MagneticField, Mass, Voltage, Wavenumber
from ..spinspin.spinspin import raman_wavevector

from typing import Dict, List, Tuple

logger = logging.getLogger(__name__)

# keys that do not change what a command computes
_UNHASHED = {"output", "threads"}

_BEAM_TILT = math.radians(20)


class SpeciesBlock(BaseModel):
    """Custom ion species declared inline"""

    label: str
    mass: Mass
    charge_number: int = Field(default=1, ge=1, description="Charge in units of e")
    cooling_wavelength: Length
    natural_linewidth: Frequency

    class Config:
        extra = "forbid"

    def to_species(self) -> IonSpecies:
        return IonSpecies(
            label=self.label,
            mass=self.mass,
            charge=self.charge_number * ELEMENTARY_CHARGE,
            cooling_wavelength=self.cooling_wavelength,
            natural_linewidth=self.natural_linewidth,
        )


def _resolve_species(v: SpeciesBlock | str) -> IonSpecies:
    return v.to_species() if isinstance(v, SpeciesBlock) else get_species(v)


def _species_must_be_known(v):
    if isinstance(v, str):
        get_species(v)
    return v


class LatticeBlock(BaseModel):
    kind: str = Field(description="square, triangular, honeycomb or kagome")
    spacing: Length
    n_sites: int = Field(ge=1)
    tilt: Angle = Field(default=Angle.si(0.0), description="Trap axis tilt from the lattice normal")
    ellipticity: float = Field(default=0.0, gt=-1, lt=1)

    class Config:
        extra = "forbid"

    @validator("spacing")
    def spacing_must_be_positive(cls, v):
        if v <= 0:
            raise ValueError(f"Lattice spacing must be positive, got <{v}>")
        return v


class FieldBlock(BaseModel):
    magnitude: MagneticField
    polar: Angle | None = Field(default=None, description="Field tilt from the lattice normal, the trap tilt if unset")
    azimuth: Angle = Angle.si(0.0)

    class Config:
        extra = "forbid"

    @validator("magnitude")
    def magnitude_must_be_positive(cls, v):
        if v <= 0:
            raise ValueError(f"Field magnitude must be positive, got <{v}>")
        return v


class TrapBlock(BaseModel):
    """Either the axial frequency or the dimensionless curvature with its voltage and length scale"""

    axial_frequency: Frequency | None = None
    curvature: float | None = Field(default=None, gt=0)
    voltage: Voltage | None = None
    length_scale: Length | None = None

    class Config:
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def confinement_must_be_given_once(cls, values):
        geometric = [values.get(k) is not None for k in ("curvature", "voltage", "length_scale")]
        if values.get("axial_frequency") is not None:
            if any(geometric):
                raise ValueError("Give either <axial_frequency> or <curvature, voltage, length_scale>, not both")
            if values["axial_frequency"] <= 0:
                raise ValueError(f"Axial frequency must be positive, got <{values['axial_frequency']}>")
        elif not all(geometric):
            raise ValueError("Trap needs <axial_frequency> or all of <curvature, voltage, length_scale>")
        return values

    def omega_z(self, species: IonSpecies) -> float:
        if self.axial_frequency is not None:
            return float(self.axial_frequency)
        return curvature_to_axial_frequency(self.curvature, self.voltage, self.length_scale, species)


class OverridesBlock(BaseModel):
    curvature: Dict[int, float] = Field(default_factory=dict, description="Site index -> curvature scale")
    species: Dict[int, SpeciesBlock | str] = Field(default_factory=dict, description="Site index -> species")

    class Config:
        extra = "forbid"

    _species_known = validator("species", each_item=True, allow_reuse=True)(_species_must_be_known)


class SolverBlock(BaseModel):
    equilibrium_tolerance: float | None = Field(default=None, gt=0, description="Largest residual force per ion, N")
    max_iterations: int = Field(default=DEFAULT_MAX_ITERATIONS, ge=1)
    stability_tolerance: float = Field(default=DEFAULT_STABILITY_TOL, gt=0, description="Accepted |Im w| / |Re w|")
    invariance_threshold: float = Field(default=1e-6, gt=0, description="Largest accepted invariance residual")

    class Config:
        extra = "forbid"


class WavevectorBlock(BaseModel):
    """Difference wavevector of the force beams, given directly or by the beam crossing angle"""

    direction: Tuple[float, float, float]
    wavenumber: Wavenumber | None = None
    crossing_angle: Angle | None = None
    wavelength: Length | None = Field(default=None, description="Beam wavelength, the cooling line if unset")

    class Config:
        extra = "forbid"

    @validator("direction")
    def direction_must_be_nonzero(cls, v):
        if not any(v):
            raise ValueError(f"Wavevector direction must be nonzero, got <{v}>")
        return v

    @root_validator(skip_on_failure=True)
    def magnitude_must_be_given_once(cls, values):
        if (values.get("wavenumber") is None) == (values.get("crossing_angle") is None):
            raise ValueError("Give exactly one of <wavenumber> and <crossing_angle>")
        return values

    def vector(self, species: IonSpecies) -> np.ndarray:
        direction = np.asarray(self.direction, dtype=float)
        if self.wavenumber is not None:
            return float(self.wavenumber) * direction / np.linalg.norm(direction)
        wavelength = species.cooling_wavelength if self.wavelength is None else float(self.wavelength)
        return raman_wavevector(wavelength, self.crossing_angle, direction)


class CoolingBlock(BaseModel):
    duration: Duration
    trajectories: int = Field(default=100, ge=1)
    beam_direction: Tuple[float, float, float] = (math.cos(_BEAM_TILT), 0.0, math.sin(_BEAM_TILT))
    detuning: Frequency | None = Field(default=None, description="Laser detuning, -linewidth / 2 if unset")
    saturation: float = Field(default=8.0, ge=0)
    axialization: float = Field(default=0.03, ge=0, description="Drive amplitude as a fraction of phi_0")
    axialization_frequency: Frequency | None = Field(default=None, description="omega_+ + omega_- if unset")
    length_scale: Length = Length.si(DEFAULT_LENGTH_SCALE)
    initial_quanta: float = Field(default=1e4, ge=0)
    quanta_spread: float = Field(default=0.1, ge=0, le=1)
    sample_interval: Duration | None = None
    time_step: Duration | None = None
    integrator: Integrator = Integrator.EXPONENTIAL

    class Config:
        extra = "forbid"

    @validator("duration")
    def duration_must_be_positive(cls, v):
        if v <= 0:
            raise ValueError(f"Cooling duration must be positive, got <{v}>")
        return v


class ODFBlock(BaseModel):
    """Spin-spin drive; the beatnote sits at ``detuning`` from the COM mode of the ``reference`` branch"""

    rabi: Frequency = Field(description="E_O / hbar")
    wavevector: WavevectorBlock
    reference: ModeKind = ModeKind.AXIAL
    detuning: Frequency
    scan: List[Frequency] = Field(default_factory=list, description="Detunings for the range fit")
    fit_range: Tuple[Length, Length] | None = None
    histogram_bins: int = Field(default=50, ge=1)
    phases: List[Angle] | None = None
    equal_phases: bool = Field(default=False, description="Drive every ion with the same force phase")
    resonance_guard: Frequency = Frequency.si(DEFAULT_RESONANCE_GUARD)

    class Config:
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def phases_must_be_given_once(cls, values):
        if values.get("equal_phases") and values.get("phases") is not None:
            raise ValueError("Give either <phases> or <equal_phases>, not both")
        return values

    def ion_phases(self, n_ions: int) -> np.ndarray | List[float] | None:
        """Explicit per-ion phases, or None for the k_R . R_j0 default"""
        if self.equal_phases:
            return np.zeros(n_ions)
        return self.phases


class DurationScan(BaseModel):
    start: Duration
    stop: Duration
    points: int = Field(ge=1)

    class Config:
        extra = "forbid"

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class BeatnoteScan(BaseModel):
    start: Frequency
    stop: Frequency
    points: int = Field(ge=1)

    class Config:
        extra = "forbid"

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class GateBlock(BaseModel):
    pair: Tuple[int, int]
    rabi: Frequency = Field(description="E_O / hbar")
    wavevector: WavevectorBlock
    duration: Duration
    beatnote: Frequency | None = Field(default=None, description="Half the bare cyclotron frequency if unset")
    durations: DurationScan | None = None
    beatnotes: BeatnoteScan | None = None
    phases: Tuple[Angle, Angle] | None = None
    resonance_guard: Frequency = Frequency.si(DEFAULT_RESONANCE_GUARD)
    stretch_detuning: Frequency | None = Field(
        default=None,
        description="Tune the pair curvature so the cyclotron stretch mode sits this far above the beatnote",
    )
    close_phase: bool = Field(
        default=False, description="Rescale the Rabi frequency so the entangling phase reaches pi at <duration>"
    )

    class Config:
        extra = "forbid"

    @validator("duration")
    def duration_must_not_be_negative(cls, v):
        if v < 0:
            raise ValueError(f"Gate duration must not be negative, got <{v}>")
        return v

    @validator("stretch_detuning")
    def stretch_detuning_must_be_positive(cls, v):
        if v is not None and v <= 0:
            raise ValueError(f"Stretch detuning must be positive, got <{v}>")
        return v

    @root_validator(skip_on_failure=True)
    def one_scan_at_most(cls, values):
        if values.get("durations") is not None and values.get("beatnotes") is not None:
            raise ValueError("Scan either <durations> or <beatnotes>")
        return values

    def mu_r(self, species: IonSpecies, b0: float) -> float:
        return 0.5 * bare_cyclotron(species, b0) if self.beatnote is None else float(self.beatnote)


class RunConfig(BaseSettings):
    species: SpeciesBlock | str = Field(default=BERYLLIUM_9.label, description="Registry label or custom species")
    lattice: LatticeBlock
    b_field: FieldBlock
    trap: TrapBlock
    overrides: OverridesBlock = Field(default_factory=OverridesBlock)
    solver: SolverBlock = Field(default_factory=SolverBlock)
    cooling: CoolingBlock | None = None
    odf: ODFBlock | None = None
    gate: GateBlock | None = None
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    output: str = Field(default="out", description="Directory for the result files")

    _species_known = validator("species", allow_reuse=True)(_species_must_be_known)

    class Config:
        title = "Penning Array Run Configuration"
        extra = "forbid"
        env_prefix = "PENNING_"
        env_file = ".env"
        env_file_encoding = "utf-8"

    @classmethod
    def load_config(cls, config: str) -> RunConfig:
        """Parses a YAML (or JSON) document"""

        logger.debug(f"Reading run config: {config}")

        try:
            data = yaml.safe_load(config)
        except yaml.YAMLError as err:
            logger.error("Run config is not valid YAML")
            raise ConfigError(ext_message=f"not valid YAML ({err})")

        if not isinstance(data, dict):
            raise ConfigError(ext_message=f"expected a mapping at the top level, got <{type(data).__name__}>")

        try:
            return cls.parse_obj(data)
        except ValidationError as err:
            logger.error("Not a valid run config")
            raise ConfigError(ext_message=str(err), data=err.errors())

    @property
    def ion_species(self) -> IonSpecies:
        return _resolve_species(self.species)

    @property
    def omega_z(self) -> float:
        return self.trap.omega_z(self.ion_species)

    def build_array(self) -> ArrayConfig:
        species = self.ion_species
        lattice = self.lattice
        config = build_lattice(
            lattice.kind,
            lattice.spacing,
            lattice.n_sites,
            lattice.tilt,
            species,
            self.omega_z,
            self.b_field.magnitude,
            overrides=self.overrides.curvature,
            ellipticity=lattice.ellipticity,
            field_polar=self.b_field.polar,
            field_azimuth=self.b_field.azimuth,
        )
        if not self.overrides.species:
            return config

        try:
            return ArrayConfig(
                species=config.species,
                b_field=config.b_field,
                tilt=config.tilt,
                sites=config.sites,
                site_overrides=config.site_overrides,
                species_overrides={idx: _resolve_species(sp) for idx, sp in self.overrides.species.items()},
            )
        except ValidationError as err:
            raise ConfigError(ext_message=str(err), data=err.errors())

    def normalized_json(self, **kwargs) -> str:
        """Configuration in SI units with sorted keys"""
        return self.json(sort_keys=True, **kwargs)

    def config_hash(self) -> str:
        return hashlib.sha256(self.json(sort_keys=True, exclude=_UNHASHED).encode("utf-8")).hexdigest()
