""" Modal decomposition and direct integration of the linearized motion """

from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel, Field
from scipy import linalg
from scipy.integrate import solve_ivp

from ..error.error import SingularBasis, UnstableIntegration
from ..model.constants import HBAR
from .matrices import SystemMatrices
from .modes import ModeSet

from typing import Callable, Tuple

logger = logging.getLogger(__name__)

MAX_BASIS_CONDITION = 1e12


class TrajectoryDecomposition(BaseModel):
    amplitude: np.ndarray = Field(description="r per mode, m")
    phase: np.ndarray = Field(description="delta per mode, rad")
    energy: np.ndarray = Field(description="E per mode, J; negative for magnetron modes")
    occupation: np.ndarray = Field(description="|E| / (hbar nu) per mode")

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @property
    def total_energy(self) -> float | np.ndarray:
        return self.energy.sum(axis=-1)


class ModalProjector:
    """Expresses (q, q') in the eigenbasis of a mode set

    q(t) = Re sum z_l gamma_l exp(-i nu_l t) with z_l = r_l exp(-i delta_l). The 6N x 6N basis
    [V, V*] with columns (gamma, -i nu gamma) is LU-factorized once and reused for every projection.
    """

    def __init__(self, modeset: ModeSet) -> None:
        self.modeset = modeset
        self.nus = modeset.frequencies
        self.energy_scales = modeset.energy_scales

        gammas = modeset.eigvecs
        self._v = np.vstack([gammas, -1j * self.nus[None, :] * gammas])
        basis = np.hstack([self._v, self._v.conj()])

        cond = np.linalg.cond(basis)
        if not np.isfinite(cond) or cond > MAX_BASIS_CONDITION:
            raise SingularBasis(ext_message=f"condition number {cond:.3g}", data={"condition": float(cond)})

        self._lu = linalg.lu_factor(basis)
        self.n3 = gammas.shape[0]

    def amplitudes(self, q, qdot) -> np.ndarray:
        """Complex z per mode; accepts single states (3N,) or batches (..., 3N)"""

        q = np.asarray(q, dtype=float)
        qdot = np.asarray(qdot, dtype=float)
        state = np.concatenate([q, qdot], axis=-1)
        flat = state.reshape(-1, 2 * self.n3).T
        solution = linalg.lu_solve(self._lu, flat.astype(complex))
        z = 2 * solution[: self.n3].T
        return z.reshape(q.shape[:-1] + (self.n3,))

    def project(self, q, qdot) -> TrajectoryDecomposition:
        z = self.amplitudes(q, qdot)
        amplitude = np.abs(z)
        energy = 0.25 * amplitude**2 * self.energy_scales
        return TrajectoryDecomposition(
            amplitude=amplitude,
            phase=-np.angle(z),
            energy=energy,
            occupation=np.abs(energy) / (HBAR * self.nus),
        )

    def synthesize(self, amplitude, phase) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(amplitude) * np.exp(-1j * np.asarray(phase))
        state = np.real(z @ self._v.T)
        return state[..., : self.n3], state[..., self.n3 :]


def project_trajectory(modeset: ModeSet, q, qdot) -> TrajectoryDecomposition:
    return ModalProjector(modeset).project(q, qdot)


def synthesize_state(modeset: ModeSet, amplitude, phase) -> Tuple[np.ndarray, np.ndarray]:
    """(q, q') at t = 0 for the given modal amplitudes r and phases delta"""
    return ModalProjector(modeset).synthesize(amplitude, phase)


def quadratic_energy(mats: SystemMatrices, q, qdot) -> float:
    """q'^T M q' / 2 + q^T Phi q / 2; the magnetic term does no work"""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    return float(0.5 * qdot @ mats.M @ qdot + 0.5 * q @ mats.Phi @ q)


def integrate_motion(
    mats: SystemMatrices,
    q0,
    qdot0,
    t_eval,
    force: Callable[[float], np.ndarray] | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> Tuple[np.ndarray, np.ndarray]:
    """Integrates M q'' = W q' - Phi q + F(t) with DOP853 in scaled units

    Time is scaled by the fastest natural rate and coordinates by the initial amplitude.
    Returns q and q' sampled at ``t_eval`` with shape (len(t_eval), 3N).
    """

    q0 = np.asarray(q0, dtype=float)
    qdot0 = np.asarray(qdot0, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    n3 = mats.dim

    inv_mass = 1.0 / mats.masses
    m_w = inv_mass[:, None] * mats.W
    m_phi = inv_mass[:, None] * mats.Phi
    rate = max(np.sqrt(np.linalg.norm(m_phi, np.inf)), np.linalg.norm(m_w, np.inf))

    length = max(np.linalg.norm(q0), np.linalg.norm(qdot0) / rate)
    if length == 0:
        length = 1.0

    a_w = m_w / rate
    a_phi = m_phi / rate**2

    def rhs(tau, y):
        q, v = y[:n3], y[n3:]
        acc = a_w @ v - a_phi @ q
        if force is not None:
            acc = acc + inv_mass * force(tau / rate) / (rate**2 * length)
        return np.concatenate([v, acc])

    y0 = np.concatenate([q0 / length, qdot0 / (rate * length)])
    tau_eval = t_eval * rate
    sol = solve_ivp(rhs, (0.0, tau_eval[-1]), y0, method="DOP853", t_eval=tau_eval, rtol=rtol, atol=atol)

    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise UnstableIntegration(ext_message=sol.message, data={"t": float(sol.t[-1]) / rate if sol.t.size else 0.0})

    logger.debug(f"Integrated {n3} coordinates over {t_eval[-1]:.3g} s in {sol.nfev} evaluations")

    return (sol.y[:n3] * length).T, (sol.y[n3:] * rate * length).T
