""" Equilibrium configurations of the trapped ions """

from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel, Field

from ..error.error import CoincidentIons, CollapseDetected, NonConvergence
from ..model.constants import K_E
from ..model.trap import ArrayConfig

from typing import Tuple

logger = logging.getLogger(__name__)

# default gradient tolerance relative to the Coulomb force at the smallest site spacing
DEFAULT_RELATIVE_TOL = 1e-9
# absolute fallback for a single ion, N
DEFAULT_ABSOLUTE_TOL = 1e-27
DEFAULT_MAX_ITERATIONS = 200
# Levenberg regularization threshold on the Hessian condition number
MAX_CONDITION = 1e12
COLLAPSE_FRACTION = 0.1
MAX_LINE_SEARCH_HALVINGS = 40


class EquilibriumResult(BaseModel):
    positions: np.ndarray = Field(description="N x 3 ion positions, m")
    gradient_norm: float = Field(description="Largest per-ion force magnitude, N")
    iterations: int
    converged: bool
    tolerance: float

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @property
    def n_ions(self) -> int:
        return len(self.positions)


def to_blocks(vectors: np.ndarray) -> np.ndarray:
    """N x 3 -> 3N in the [x1..xN, y1..yN, z1..zN] order"""
    return np.asarray(vectors).T.reshape(-1)


def from_blocks(flat: np.ndarray) -> np.ndarray:
    """3N in block order -> N x 3"""
    return np.asarray(flat).reshape(3, -1).T


def _pair_geometry(pos: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pair differences R_jk = r_j - r_k and distances with the diagonal set to inf"""

    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, np.inf)

    coincident = np.argwhere(dist == 0)
    if len(coincident):
        j, k = coincident[0]
        raise CoincidentIons(ext_message=f"{j}, {k}", data={"pairs": coincident.tolist()})

    return diff, dist


def _validated_positions(config: ArrayConfig, pos) -> np.ndarray:
    arr = np.asarray(pos, dtype=float)
    if arr.shape != (config.n_ions, 3):
        raise ValueError(f"Positions must have shape <{(config.n_ions, 3)}>, got <{arr.shape}>")
    return arr


def total_potential(config: ArrayConfig, pos) -> float:
    """Trap energy of every ion relative to its site center plus the pairwise Coulomb energy, J"""

    pos = _validated_positions(config, pos)
    _, dist = _pair_geometry(pos)

    rel = pos - config.centers
    trap = 0.5 * config.charge * np.einsum("ja,jab,jb->", rel, config.quadrupole_tensors, rel)
    coulomb = 0.5 * K_E * config.charge**2 * np.sum(1.0 / dist)

    return float(trap + coulomb)


def potential_gradient(config: ArrayConfig, pos) -> np.ndarray:
    """N x 3 gradient of total_potential, N"""

    pos = _validated_positions(config, pos)
    diff, dist = _pair_geometry(pos)

    trap = config.charge * np.einsum("jab,jb->ja", config.quadrupole_tensors, pos - config.centers)
    coulomb = -K_E * config.charge**2 * np.sum(diff / dist[:, :, None] ** 3, axis=1)

    return trap + coulomb


def potential_hessian(config: ArrayConfig, pos) -> np.ndarray:
    """3N x 3N Hessian Phi = V + K in block order, N/m"""

    pos = _validated_positions(config, pos)
    diff, dist = _pair_geometry(pos)
    n = config.n_ions
    ke2 = K_E * config.charge**2

    r3 = 1.0 / dist**3
    r5 = 1.0 / dist**5

    hess = np.zeros((3 * n, 3 * n))
    for mu in range(3):
        for nu in range(3):
            # off-diagonal ion pairs: k_e e^2 (delta R^2 - 3 R^mu R^nu) / R^5
            block = -3 * ke2 * diff[:, :, mu] * diff[:, :, nu] * r5
            if mu == nu:
                block += ke2 * r3
            np.fill_diagonal(block, 0.0)
            np.fill_diagonal(block, -block.sum(axis=1))
            block[np.diag_indices(n)] += config.charge * config.quadrupole_tensors[:, mu, nu]
            hess[mu * n : (mu + 1) * n, nu * n : (nu + 1) * n] = block

    return hess


def _default_tolerance(config: ArrayConfig) -> float:
    spacing = config.min_site_spacing
    if not np.isfinite(spacing):
        return DEFAULT_ABSOLUTE_TOL
    return DEFAULT_RELATIVE_TOL * K_E * config.charge**2 / spacing**2


def _force_residual(gradient: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(gradient, axis=1)))


def _check_collapse(config: ArrayConfig, pos: np.ndarray) -> None:
    if config.n_ions < 2:
        return
    _, dist = _pair_geometry(pos)
    limit = COLLAPSE_FRACTION * config.min_site_spacing
    closest = float(dist.min())
    if closest < limit:
        raise CollapseDetected(
            ext_message=f"closest pair at {closest:.4g} m, limit {limit:.4g} m",
            data={"min_distance": closest, "limit": limit},
        )


def solve_equilibrium(
    config: ArrayConfig,
    guess=None,
    tol: float | None = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> EquilibriumResult:
    """Stationary point of the total potential by damped Newton iterations on the gradient

    Penning equilibria are saddle points (the radial directions are anti-confining), so the solver
    looks for a root of the gradient and never requires a minimum.
    """

    pos = config.centers.copy() if guess is None else _validated_positions(config, guess).copy()
    tol = _default_tolerance(config) if tol is None else tol

    grad = potential_gradient(config, pos)
    residual = _force_residual(grad)
    iteration = 0

    while residual > tol:
        if iteration >= max_iterations:
            logger.error(f"Equilibrium did not converge in {max_iterations} iterations, residual {residual:.3g} N")
            raise NonConvergence(
                ext_message=f"{iteration} iterations, residual {residual:.3g} N",
                data={"iterations": iteration, "residual": residual},
            )

        hess = potential_hessian(config, pos)
        if np.linalg.cond(hess) > MAX_CONDITION:
            hess = hess + MAX_CONDITION**-1 * np.linalg.norm(hess, 2) * np.eye(len(hess))
            logger.debug("Near-singular Hessian, adding Levenberg regularization")

        step = from_blocks(np.linalg.solve(hess, -to_blocks(grad)))
        grad_norm = np.linalg.norm(grad)

        alpha = 1.0
        for _ in range(MAX_LINE_SEARCH_HALVINGS):
            trial = pos + alpha * step
            trial_grad = potential_gradient(config, trial)
            if np.linalg.norm(trial_grad) < grad_norm:
                break
            alpha *= 0.5

        pos, grad = trial, trial_grad
        _check_collapse(config, pos)
        residual = _force_residual(grad)
        iteration += 1
        logger.debug(f"Newton iteration {iteration}: step scale {alpha:.3g}, residual {residual:.3g} N")

    logger.info(f"Equilibrium of {config.n_ions} ions found in {iteration} iterations, residual {residual:.3g} N")

    return EquilibriumResult(positions=pos, gradient_norm=residual, iterations=iteration, converged=True, tolerance=tol)
