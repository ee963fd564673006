""" Linearized equations of motion """

from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel, validator

from ..equilibrium.equilibrium import potential_hessian
from ..model.trap import ArrayConfig

from typing import Tuple

logger = logging.getLogger(__name__)

MATRIX_TOL = 1e-12


def cross_matrix(b: np.ndarray) -> np.ndarray:
    """C with C v = v x b"""
    bx, by, bz = b
    return np.array([[0.0, bz, -by], [-bz, 0.0, bx], [by, -bx, 0.0]])


class SystemMatrices(BaseModel):
    """M q'' = W q' - Phi q in the [x1..xN, y1..yN, z1..zN] coordinate order"""

    M: np.ndarray
    W: np.ndarray
    Phi: np.ndarray
    n_ions: int
    charge: float

    class Config:
        title = "System Matrices"
        frozen = True
        arbitrary_types_allowed = True

    @validator("M")
    def mass_must_be_positive_diagonal(cls, v):
        if np.any(v != np.diag(np.diag(v))) or np.any(np.diag(v) <= 0):
            raise ValueError("Mass matrix must be diagonal with positive entries")
        return v

    @validator("W")
    def w_must_be_antisymmetric(cls, v):
        if np.linalg.norm(v + v.T) > MATRIX_TOL * max(np.linalg.norm(v), 1.0):
            raise ValueError("Magnetic matrix W is not antisymmetric")
        return v

    @validator("Phi")
    def phi_must_be_symmetric_and_traceless(cls, v):
        norm = np.linalg.norm(v)
        if np.linalg.norm(v - v.T) > MATRIX_TOL * norm:
            raise ValueError("Potential matrix Phi is not symmetric")
        if abs(np.trace(v)) > MATRIX_TOL * norm * len(v):
            raise ValueError(f"Potential matrix Phi is not traceless, trace <{np.trace(v)}>")
        return v

    @property
    def dim(self) -> int:
        return 3 * self.n_ions

    @property
    def masses(self) -> np.ndarray:
        return np.diag(self.M)

    @property
    def phi_over_e(self) -> np.ndarray:
        """Hessian of the electric potential, V/m^2"""
        return self.Phi / self.charge

    def mass_weighted(self) -> Tuple[np.ndarray, np.ndarray]:
        """W' = M^-1/2 W M^-1/2 and Phi' = M^-1/2 Phi M^-1/2"""
        s = 1.0 / np.sqrt(self.masses)
        return s[:, None] * self.W * s[None, :], s[:, None] * self.Phi * s[None, :]


def assemble_matrices(config: ArrayConfig, positions) -> SystemMatrices:
    n = config.n_ions
    mass = np.diag(np.tile(config.masses, 3))
    magnetic = np.kron(config.charge * cross_matrix(config.b_field), np.eye(n))
    phi = potential_hessian(config, positions)

    logger.debug(f"Assembled {3 * n}x{3 * n} system matrices")

    return SystemMatrices(M=mass, W=magnetic, Phi=phi, n_ions=n, charge=config.charge)
