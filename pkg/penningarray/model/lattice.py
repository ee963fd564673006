""" Finite 2-d lattice patches """

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod

import numpy as np

from ..error.error import BadOverrideIndex, UnsupportedLattice
from .species import IonSpecies
from .trap import ArrayConfig, TrapSite, axis_frame

from typing import ClassVar, Dict, Mapping, Tuple, Type

logger = logging.getLogger(__name__)

# positions are compared on this grid (fraction of d) when ordering shells
_ORDER_DECIMALS = 9


class Lattice(ABC):
    """A Bravais lattice with a basis, spaced so the nearest-neighbor distance is ``d``"""

    kind: ClassVar[str]

    def __init__(self, d: float) -> None:
        if d <= 0:
            raise ValueError(f"Lattice spacing must be positive, got <{d}>")
        self.d = d

    @classmethod
    def supported_lattices(cls) -> Dict[str, Type[Lattice]]:
        def all_subclasses(cls) -> Dict[str, Type[Lattice]]:
            subc = {}
            for subclass in cls.__subclasses__():
                subc |= {subclass.kind: subclass}
                subc |= all_subclasses(subclass)

            return subc

        return all_subclasses(cls)

    @classmethod
    def get_lattice(cls, kind: str, d: float) -> Lattice:
        lattice_cls = cls.supported_lattices().get(kind)
        if lattice_cls is None:
            raise UnsupportedLattice(ext_message=kind, data={"supported": sorted(cls.supported_lattices())})
        return lattice_cls(d)

    @abstractmethod
    def vectors(self) -> Tuple[np.ndarray, np.ndarray]:
        """Primitive vectors a1, a2 (2-d)"""
        pass  # pragma: no cover

    @abstractmethod
    def basis(self) -> np.ndarray:
        """Basis positions relative to a lattice point, shape (n_basis, 2)"""
        pass  # pragma: no cover

    def origin(self) -> np.ndarray:
        """Point of the infinite lattice that becomes the patch center"""
        return np.zeros(2)

    def patch(self, n_sites: int) -> np.ndarray:
        """First ``n_sites`` sites ordered by distance from the center, ties by (x, y); shape (n_sites, 3)"""

        if n_sites < 1:
            raise ValueError(f"Number of sites must be positive, got <{n_sites}>")

        a1, a2 = self.vectors()
        basis = self.basis()
        reach = int(math.ceil(math.sqrt(n_sites / len(basis)))) + 3
        idx = np.arange(-reach, reach + 1)
        n1, n2 = np.meshgrid(idx, idx, indexing="ij")
        points = n1.reshape(-1, 1) * a1 + n2.reshape(-1, 1) * a2
        points = (points[:, None, :] + basis[None, :, :]).reshape(-1, 2) - self.origin()

        key = np.round(points / self.d, _ORDER_DECIMALS)
        dist = np.round(np.hypot(key[:, 0], key[:, 1]), _ORDER_DECIMALS)
        order = np.lexsort((key[:, 1], key[:, 0], dist))
        chosen = points[order[:n_sites]]

        return np.column_stack([chosen, np.zeros(n_sites)])


class SquareLattice(Lattice):
    kind = "square"

    def vectors(self):
        return np.array([self.d, 0.0]), np.array([0.0, self.d])

    def basis(self):
        return np.zeros((1, 2))


class TriangularLattice(Lattice):
    kind = "triangular"

    def vectors(self):
        return np.array([self.d, 0.0]), np.array([0.5 * self.d, 0.5 * math.sqrt(3) * self.d])

    def basis(self):
        return np.zeros((1, 2))


class HoneycombLattice(Lattice):
    """Centered on a hexagon, so the first six sites form a ring"""

    kind = "honeycomb"

    def vectors(self):
        a = math.sqrt(3) * self.d
        return np.array([a, 0.0]), np.array([0.5 * a, 0.5 * math.sqrt(3) * a])

    def basis(self):
        a1, a2 = self.vectors()
        return np.array([[0.0, 0.0], (a1 + a2) / 3])

    def origin(self):
        a1, a2 = self.vectors()
        return 2 * (a1 + a2) / 3


class KagomeLattice(Lattice):
    """Centered on a hexagon"""

    kind = "kagome"

    def vectors(self):
        return np.array([2 * self.d, 0.0]), np.array([self.d, math.sqrt(3) * self.d])

    def basis(self):
        a1, a2 = self.vectors()
        return np.array([[0.0, 0.0], a1 / 2, a2 / 2])

    def origin(self):
        a1, a2 = self.vectors()
        return (a1 + a2) / 2


def build_lattice(
    kind: str,
    d: float,
    n_sites: int,
    tilt: float,
    species: IonSpecies,
    omega_z: float,
    b0: float,
    overrides: Mapping[int, float] | None = None,
    ellipticity: float = 0.0,
    field_polar: float | None = None,
    field_azimuth: float = 0.0,
) -> ArrayConfig:
    """Lattice patch in the xy plane with identical quadrupoles whose confining axis is tilted by ``tilt``

    The field points along the trap axis unless ``field_polar`` gives a separate orientation.
    ``overrides`` rescale individual site curvatures.
    """

    lattice = Lattice.get_lattice(kind, d)
    overrides = dict(overrides or {})
    for idx in overrides:
        if not 0 <= idx < n_sites:
            raise BadOverrideIndex(ext_message=str(idx), data={"n_sites": n_sites})

    centers = lattice.patch(n_sites)
    sites = [
        TrapSite.symmetric(center, species, omega_z, polar=tilt, ellipticity=ellipticity) for center in centers
    ]

    polar = tilt if field_polar is None else field_polar
    b_field = b0 * axis_frame(polar, field_azimuth)[2]

    logger.debug(f"Built {kind} lattice with {n_sites} sites, d = {d:.4g} m, tilt = {math.degrees(tilt):.3g} deg")

    return ArrayConfig(species=species, b_field=b_field, tilt=tilt, sites=sites, site_overrides=overrides)
