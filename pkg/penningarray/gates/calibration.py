""" Tuning a gate pair: the pair curvature sets the stretch detuning, the drive strength closes the phase """

from __future__ import annotations

import logging
import math

from pydantic import BaseModel, Field
from scipy import optimize

from ..equilibrium.equilibrium import DEFAULT_MAX_ITERATIONS, solve_equilibrium
from ..error.error import DegenerateNormalization, UnstableSystem
from ..model.constants import TWO_PI
from ..model.trap import ArrayConfig
from ..modes.modes import DEFAULT_STABILITY_TOL, ModeSet, compute_modes
from .gates import GateDrive, gate_trajectory, local_mode_detunings

from typing import Tuple

logger = logging.getLogger(__name__)

DEFAULT_SCALE_BRACKET = (1.0, 2.0)
DEFAULT_SCALE_TOL = 1e-9


class PairCalibration(BaseModel):
    config: ArrayConfig
    scale: float = Field(gt=0, description="Curvature scale applied to both pair sites")
    stretch_detuning: float = Field(description="Cyclotron stretch mode minus the beatnote, rad/s")
    evaluations: int

    class Config:
        frozen = True
        arbitrary_types_allowed = True


def with_pair_scale(config: ArrayConfig, pair: Tuple[int, int], scale: float) -> ArrayConfig:
    """Copy of ``config`` with both pair sites' curvature scaled by ``scale`` (replacing earlier overrides)"""

    overrides = dict(config.site_overrides)
    for idx in pair:
        overrides[idx] = float(scale)
    return ArrayConfig(
        species=config.species,
        b_field=config.b_field,
        tilt=config.tilt,
        sites=config.sites,
        site_overrides=overrides,
        species_overrides=config.species_overrides,
    )


def _pair_modes(config: ArrayConfig, tol: float | None, max_iterations: int, stability_tol: float) -> ModeSet:
    eq = solve_equilibrium(config, tol=tol, max_iterations=max_iterations)
    _, modeset = compute_modes(config, eq.positions, stability_tol=stability_tol)
    return modeset


def calibrate_pair_curvature(
    config: ArrayConfig,
    pair: Tuple[int, int],
    target: float,
    reference: float,
    bracket: Tuple[float, float] = DEFAULT_SCALE_BRACKET,
    xtol: float = DEFAULT_SCALE_TOL,
    tol: float | None = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    stability_tol: float = DEFAULT_STABILITY_TOL,
) -> PairCalibration:
    """Curvature scale of the pair sites that puts the cyclotron stretch mode ``target`` above ``reference``

    Raising the pair curvature pushes the cyclotron and magnetron branches towards each other,
    so the stretch detuning falls monotonically and vanishes at the stability edge. Scales past
    the edge count as zero detuning, which keeps the root bracketed.
    """

    if target <= 0:
        raise ValueError(f"Target stretch detuning must be positive, got <{target}>")

    evaluations = 0

    def residual(scale: float) -> float:
        nonlocal evaluations
        evaluations += 1
        try:
            modeset = _pair_modes(with_pair_scale(config, pair, scale), tol, max_iterations, stability_tol)
        except (UnstableSystem, DegenerateNormalization):
            logger.debug(f"Pair scale {scale:.9f}: at or past the stability edge")
            return -target
        detuning = local_mode_detunings(modeset, pair, reference)["stretch_cyclotron"].detuning
        logger.debug(f"Pair scale {scale:.9f}: stretch detuning {detuning / TWO_PI:.6g} Hz")
        return detuning - target

    lo, hi = bracket
    try:
        scale = optimize.brentq(residual, lo, hi, xtol=xtol)
    except ValueError as err:
        raise ValueError(
            f"Stretch detuning {target / TWO_PI:.6g} Hz is not reached for pair scales in <{bracket}>"
        ) from err

    calibrated = with_pair_scale(config, pair, scale)
    modeset = _pair_modes(calibrated, tol, max_iterations, stability_tol)
    detuning = local_mode_detunings(modeset, pair, reference)["stretch_cyclotron"].detuning

    logger.info(
        f"Pair {pair} curvature scale {scale:.9f} (axial {calibrated.site_axial_frequency(pair[0]) / TWO_PI:.6g} Hz) "
        f"gives stretch detuning {detuning / TWO_PI:.6g} Hz after {evaluations} evaluations"
    )
    return PairCalibration(config=calibrated, scale=scale, stretch_detuning=detuning, evaluations=evaluations)


def close_entangling_phase(modeset: ModeSet, drive: GateDrive) -> GateDrive:
    """Drive rescaled so the accumulated entangling phase reaches pi at ``drive.duration``

    The geometric phases grow with the square of the force amplitude.
    """

    accumulated = gate_trajectory(modeset, drive).accumulated_phase
    if drive.e_o == 0 or accumulated == 0:
        raise ValueError("The drive accumulates no entangling phase")

    closed = drive.copy(update={"e_o": drive.e_o * math.sqrt(math.pi / abs(accumulated))})
    logger.info(f"Entangling phase {accumulated:.4f} rad at E_O = {drive.e_o:.4g} J, rescaled to {closed.e_o:.4g} J")
    return closed
