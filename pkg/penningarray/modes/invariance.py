""" Invariance theorems for the mode spectrum """

from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel

from .matrices import SystemMatrices
from .modes import ModeSet

logger = logging.getLogger(__name__)

RESIDUAL_WARNING = 1e-8


class InvarianceCheck(BaseModel):
    lhs: float
    rhs: float
    residual: float

    class Config:
        frozen = True

    @property
    def holds(self) -> bool:
        return self.residual <= RESIDUAL_WARNING


def invariance_sum(modeset: ModeSet, mats: SystemMatrices) -> InvarianceCheck:
    """sum of nu^2 against sum_j (e B / m_j)^2 = -tr(W'^2) / 2, relative residual"""

    lhs = float(np.sum(modeset.frequencies**2))
    w_prime, _ = mats.mass_weighted()
    rhs = float(-0.5 * np.trace(w_prime @ w_prime))
    scale = abs(rhs) if rhs != 0 else max(abs(lhs), 1.0)
    residual = abs(lhs - rhs) / scale

    if residual > RESIDUAL_WARNING:
        logger.warning(f"Frequency sum rule violated: residual {residual:.3g}")

    return InvarianceCheck(lhs=lhs, rhs=rhs, residual=residual)


def invariance_product(modeset: ModeSet, mats: SystemMatrices) -> InvarianceCheck:
    """log prod(m nu^2) against log |det Phi|, absolute residual of the logarithms"""

    lhs = float(np.sum(np.log(modeset.frequencies**2)) + np.sum(np.log(mats.masses)))
    sign, rhs = np.linalg.slogdet(mats.Phi)
    if sign <= 0:
        logger.warning(f"det(Phi) has sign {sign:g}, the product rule cannot hold")
    residual = abs(lhs - float(rhs))

    if residual > RESIDUAL_WARNING:
        logger.warning(f"Frequency product rule violated: log residual {residual:.3g}")

    return InvarianceCheck(lhs=lhs, rhs=float(rhs), residual=residual)
