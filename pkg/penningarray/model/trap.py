""" Trap site and array configuration models """

from __future__ import annotations

import logging
import math

import numpy as np
from pydantic import BaseModel, Field, validator

from ..error.error import BadOverrideIndex
from .species import IonSpecies

from typing import Dict, List

logger = logging.getLogger(__name__)

# relative tolerance for the symmetric/traceless checks of the quadrupole tensor
TENSOR_TOL = 1e-12


def axis_frame(polar: float, azimuth: float = 0.0) -> np.ndarray:
    """Orthonormal frame whose third row points at (polar, azimuth) from the lattice normal (z)

    Rows are (e1, e2, e3): e3 is the axis, e1 lies in the plane spanned by e3 and z, e2 = e3 x e1.
    """

    st, ct = math.sin(polar), math.cos(polar)
    sp, cp = math.sin(azimuth), math.cos(azimuth)
    return np.array(
        [
            [ct * cp, ct * sp, -st],
            [-sp, cp, 0.0],
            [st * cp, st * sp, ct],
        ]
    )


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape <{arr.shape}>")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got <{arr}>")
    return arr


class TrapSite(BaseModel):
    center: np.ndarray = Field(description="Site center, m")
    quadrupole_tensor: np.ndarray = Field(description="Hessian of the electric potential at the site, V/m^2")
    frame: np.ndarray = Field(
        default_factory=lambda: np.eye(3), description="Rows: radial axes e1, e2 and the confining axis e3"
    )
    axial_frequency_target: float | None = Field(
        default=None, gt=0, description="Axial frequency the tensor was built from, rad/s"
    )

    class Config:
        title = "Trap Site"
        frozen = True
        arbitrary_types_allowed = True

    @validator("center", pre=True)
    def center_must_be_3_vector(cls, v):
        return _as_vector(v, "Site center")

    @validator("quadrupole_tensor", pre=True)
    def tensor_must_be_symmetric_and_traceless(cls, v):
        arr = np.asarray(v, dtype=float)
        if arr.shape != (3, 3):
            raise ValueError(f"Quadrupole tensor must be 3x3, got shape <{arr.shape}>")

        norm = np.linalg.norm(arr)
        if np.linalg.norm(arr - arr.T) > TENSOR_TOL * norm:
            raise ValueError(f"Quadrupole tensor <{arr.tolist()}> is not symmetric")
        if abs(np.trace(arr)) > TENSOR_TOL * norm:
            raise ValueError(f"Quadrupole tensor <{arr.tolist()}> is not traceless (Laplace equation)")

        return 0.5 * (arr + arr.T)

    @validator("frame", pre=True)
    def frame_must_be_orthonormal(cls, v):
        arr = np.asarray(v, dtype=float)
        if arr.shape != (3, 3) or not np.allclose(arr @ arr.T, np.eye(3), atol=1e-12):
            raise ValueError(f"Site frame <{arr.tolist()}> is not orthonormal")
        return arr

    @classmethod
    def symmetric(
        cls,
        center,
        species: IonSpecies,
        omega_z: float,
        polar: float = 0.0,
        azimuth: float = 0.0,
        ellipticity: float = 0.0,
    ) -> TrapSite:
        """Ideal quadrupole confining along an axis tilted by ``polar`` from the lattice normal

        e*Q = m*omega_z^2 * (-(1+eps)/2 e1e1 - (1-eps)/2 e2e2 + e3e3)
        """

        if omega_z <= 0:
            raise ValueError(f"Axial frequency must be positive, got <{omega_z}>")

        frame = axis_frame(polar, azimuth)
        e1, e2, e3 = frame
        scale = species.mass * omega_z**2 / species.charge
        tensor = scale * (
            -0.5 * (1 + ellipticity) * np.outer(e1, e1) - 0.5 * (1 - ellipticity) * np.outer(e2, e2) + np.outer(e3, e3)
        )

        return cls(center=center, quadrupole_tensor=tensor, frame=frame, axial_frequency_target=omega_z)

    @property
    def axis(self) -> np.ndarray:
        return self.frame[2]

    @property
    def axial_curvature(self) -> float:
        """Potential curvature along the confining axis, V/m^2"""
        return float(self.axis @ self.quadrupole_tensor @ self.axis)

    def axial_frequency(self, species: IonSpecies) -> float:
        return math.sqrt(species.charge * self.axial_curvature / species.mass)


class ArrayConfig(BaseModel):
    species: IonSpecies
    b_field: np.ndarray = Field(description="Homogeneous magnetic field vector, T")
    tilt: float = Field(default=0.0, description="Angle between the trap axis and the lattice normal, rad")
    sites: List[TrapSite] = Field(min_items=1)
    site_overrides: Dict[int, float] = Field(
        default_factory=dict, description="Site index -> curvature scale applied to the site quadrupole"
    )
    species_overrides: Dict[int, IonSpecies] = Field(
        default_factory=dict, description="Site index -> species loaded at that site (same charge)"
    )

    class Config:
        title = "Trap Array Configuration"
        frozen = True
        arbitrary_types_allowed = True

    @validator("b_field", pre=True)
    def field_must_be_nonzero(cls, v):
        arr = _as_vector(v, "Magnetic field")
        if np.linalg.norm(arr) == 0:
            raise ValueError("Magnetic field must be nonzero")
        return arr

    @validator("sites")
    def site_centers_must_be_distinct(cls, v: List[TrapSite]):
        centers = np.array([s.center for s in v])
        if len(np.unique(centers, axis=0)) != len(centers):
            raise ValueError("Site centers must be distinct")
        return v

    @validator("site_overrides", "species_overrides")
    def override_indices_must_exist(cls, v, values, field):
        n = len(values.get("sites", []))
        for idx in v:
            if not 0 <= idx < n:
                raise BadOverrideIndex(ext_message=str(idx), data={"field": field.name, "n_sites": n})
        return v

    @validator("site_overrides")
    def curvature_scales_must_be_positive(cls, v):
        for idx, scale in v.items():
            if scale <= 0:
                raise ValueError(f"Curvature scale <{scale}> for site <{idx}> must be positive")
        return v

    @validator("species_overrides")
    def override_species_must_share_charge(cls, v, values):
        species = values.get("species")
        for idx, sp in v.items():
            if species is not None and not math.isclose(sp.charge, species.charge, rel_tol=1e-12):
                raise ValueError(f"Species <{sp.label}> at site <{idx}> has a different charge")
        return v

    @property
    def n_ions(self) -> int:
        return len(self.sites)

    @property
    def centers(self) -> np.ndarray:
        return np.array([s.center for s in self.sites])

    @property
    def b_magnitude(self) -> float:
        return float(np.linalg.norm(self.b_field))

    @property
    def b_direction(self) -> np.ndarray:
        return self.b_field / self.b_magnitude

    @property
    def charge(self) -> float:
        return self.species.charge

    def species_at(self, idx: int) -> IonSpecies:
        return self.species_overrides.get(idx, self.species)

    @property
    def masses(self) -> np.ndarray:
        return np.array([self.species_at(j).mass for j in range(self.n_ions)])

    @property
    def quadrupole_tensors(self) -> np.ndarray:
        """N x 3 x 3 site tensors with the curvature overrides applied, V/m^2"""
        tensors = np.array([s.quadrupole_tensor for s in self.sites])
        for idx, scale in self.site_overrides.items():
            tensors[idx] = tensors[idx] * scale
        return tensors

    def site_axial_frequency(self, idx: int) -> float:
        sp = self.species_at(idx)
        site = self.sites[idx]
        return math.sqrt(sp.charge * site.axial_curvature * self.site_overrides.get(idx, 1.0) / sp.mass)

    @property
    def min_site_spacing(self) -> float:
        centers = self.centers
        if len(centers) < 2:
            return math.inf
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        return float(dist[~np.eye(len(centers), dtype=bool)].min())


class PairGeometry(BaseModel):
    separation: float = Field(gt=0, description="Pair distance R, m")
    polar: float = Field(description="Angle between R and the B axis, rad")
    azimuth: float = Field(description="Azimuth of R around the B axis, rad")

    class Config:
        frozen = True

    @classmethod
    def from_positions(cls, r_i, r_j, b_direction) -> PairGeometry:
        r = np.asarray(r_j, dtype=float) - np.asarray(r_i, dtype=float)
        dist = float(np.linalg.norm(r))
        b = np.asarray(b_direction, dtype=float)
        b = b / np.linalg.norm(b)
        polar = math.acos(max(-1.0, min(1.0, float(r @ b) / dist)))
        e1, e2, _ = axis_frame(math.acos(max(-1.0, min(1.0, b[2]))), math.atan2(b[1], b[0]))
        azimuth = math.atan2(float(r @ e2), float(r @ e1))
        return cls(separation=dist, polar=polar, azimuth=azimuth)
