""" Effective Ising couplings from an optical dipole force """

from __future__ import annotations

import hashlib
import logging
import math

import numpy as np
from pydantic import BaseModel, Field, validator

from ..error.error import InsufficientPairs, ResonantDrive
from ..model.constants import HBAR, TWO_PI
from ..modes.modes import ModeKind, ModeSet

from typing import List, Sequence, Tuple

logger = logging.getLogger(__name__)

DEFAULT_RESONANCE_GUARD = TWO_PI * 10.0
MIN_SEPARATIONS = 5
# separations equal to this relative precision share a bin
SEPARATION_DECIMALS = 6


def raman_wavevector(wavelength: float, crossing_angle: float, direction) -> np.ndarray:
    """Difference wavevector of two beams crossing at ``crossing_angle``: |k_R| = 2k sin(angle/2)"""

    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ValueError("Wavevector direction must be nonzero")
    return 2 * (TWO_PI / wavelength) * math.sin(crossing_angle / 2) * direction / norm


def modeset_fingerprint(modeset: ModeSet) -> str:
    return hashlib.sha256(np.round(modeset.frequencies, 6).tobytes()).hexdigest()[:16]


class ODFParams(BaseModel):
    e_o: float = Field(ge=0, description="Force amplitude energy scale E_O, J")
    mu_r: float = Field(gt=0, description="Beatnote frequency, rad/s")
    k_r: np.ndarray = Field(description="Difference wavevector, rad/m")
    phases: np.ndarray | None = Field(default=None, description="Per-ion force phases, rad; k_R . R_j0 if unset")
    resonance_guard: float = Field(default=DEFAULT_RESONANCE_GUARD, gt=0, description="rad/s")

    class Config:
        title = "Optical Dipole Force"
        frozen = True
        arbitrary_types_allowed = True

    @validator("k_r", pre=True)
    def k_r_must_be_3_vector(cls, v):
        arr = np.asarray(v, dtype=float)
        if arr.shape != (3,) or not np.all(np.isfinite(arr)):
            raise ValueError(f"ODF wavevector must be a finite 3-vector, got <{v}>")
        return arr

    @validator("phases", pre=True)
    def phases_must_be_finite(cls, v):
        if v is None:
            return v
        arr = np.asarray(v, dtype=float)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValueError("ODF phases must be a finite 1-d array")
        return arr

    @classmethod
    def from_rabi(cls, rabi: float, mu_r: float, k_r, **kwargs) -> ODFParams:
        """E_O = hbar * rabi"""
        return cls(e_o=HBAR * rabi, mu_r=mu_r, k_r=k_r, **kwargs)

    @property
    def rabi(self) -> float:
        return self.e_o / HBAR

    def ion_phases(self, positions) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        if self.phases is not None:
            if len(self.phases) != len(positions):
                raise ValueError(f"Got <{len(self.phases)}> phases for <{len(positions)}> ions")
            return self.phases
        return positions @ self.k_r


class CouplingMatrix(BaseModel):
    J: np.ndarray = Field(description="N x N couplings J_jj' / hbar, rad/s, zero diagonal")
    mu_r: float
    e_o: float
    fingerprint: str = Field(description="Hash of the mode frequencies the couplings were built from")

    class Config:
        title = "Ising Coupling Matrix"
        frozen = True
        arbitrary_types_allowed = True

    @validator("J")
    def j_must_be_symmetric_and_finite(cls, v):
        if not np.all(np.isfinite(v)):
            raise ValueError("Coupling matrix has non-finite entries")
        if np.linalg.norm(v - v.T) > 1e-12 * max(np.linalg.norm(v), 1e-300):
            raise ValueError("Coupling matrix is not symmetric")
        return v

    @property
    def n_ions(self) -> int:
        return self.J.shape[0]

    def upper(self) -> np.ndarray:
        """Couplings for the pairs j < j'"""
        return self.J[np.triu_indices(self.n_ions, k=1)]


class RangeFit(BaseModel):
    exponent: float = Field(description="a in |J| ~ 1/R^a")
    residual: float = Field(ge=0, description="RMS residual of the log-log fit")
    fit_range: Tuple[float, float] = Field(description="Separations included, m")
    n_separations: int = Field(ge=MIN_SEPARATIONS)

    class Config:
        frozen = True


class Histogram(BaseModel):
    edges: np.ndarray
    counts: np.ndarray

    class Config:
        frozen = True
        arbitrary_types_allowed = True


class BandEdge(BaseModel):
    branch: ModeKind
    com_index: int
    is_edge: bool
    at_maximum: bool | None = Field(default=None, description="True if the COM mode tops the branch")

    class Config:
        frozen = True


class RangeScanRow(BaseModel):
    detuning: float = Field(description="mu_R minus the reference frequency, rad/s")
    exponent: float
    residual: float


def lamb_dicke(modeset: ModeSet, k_r) -> np.ndarray:
    """eta[l, j] = sum_nu k_nu rho_l0 gamma_l,j,nu for every mode l and ion j"""

    k = np.asarray(k_r, dtype=float)
    n = modeset.n_ions
    gammas = modeset.eigvecs
    projected = k[0] * gammas[:n] + k[1] * gammas[n : 2 * n] + k[2] * gammas[2 * n :]
    rho0 = np.array([m.rho0 for m in modeset.modes])
    return (projected * rho0[None, :]).T


def _creation_lamb_dicke(modeset: ModeSet, k_r) -> np.ndarray:
    """hbar k . alpha per mode and ion; the conjugate of eta for negative-energy modes"""

    k = np.asarray(k_r, dtype=float)
    n = modeset.n_ions
    alphas = np.column_stack([m.alpha for m in modeset.modes])
    return HBAR * (k[0] * alphas[:n] + k[1] * alphas[n : 2 * n] + k[2] * alphas[2 * n :]).T


def _check_resonance(modeset: ModeSet, mu: float, guard: float) -> None:
    offending = np.flatnonzero(np.abs(modeset.frequencies - mu) < guard)
    if offending.size:
        raise ResonantDrive(
            ext_message=", ".join(str(i) for i in offending),
            data={"modes": offending.tolist(), "mu_r": mu, "guard": guard},
        )


def coupling_matrix(modeset: ModeSet, odf: ODFParams, positions) -> CouplingMatrix:
    """Static part of the second-order Magnus term for arbitrary per-ion force phases

    J_jj' = (E_O^2 / 2 hbar^2) sum_l [w_l cos(phi_j - phi_j') Re(h*_lj h_lj')
            - mu sin(phi_j - phi_j') Im(h*_lj h_lj')] / (mu^2 - nu_l^2)

    with w_l the signed mode frequency and h = hbar k . alpha. Equal phases give the familiar
    sum over w_l Re(eta*_lj eta_lj') / (mu^2 - nu_l^2).
    """

    if not modeset.normalized:
        raise ValueError("Couplings need a quantum-normalized mode set")

    mu = odf.mu_r
    _check_resonance(modeset, mu, odf.resonance_guard)

    phases = odf.ion_phases(positions)
    h = _creation_lamb_dicke(modeset, odf.k_r)
    nus = modeset.frequencies
    signed = np.array([m.signed_omega for m in modeset.modes])
    denom = mu**2 - nus**2

    cross_signed = (h.conj().T * (signed / denom)[None, :]) @ h
    cross_mu = (h.conj().T * (mu / denom)[None, :]) @ h

    delta = phases[:, None] - phases[None, :]
    couplings = np.cos(delta) * cross_signed.real - np.sin(delta) * cross_mu.imag
    couplings *= odf.e_o**2 / (2 * HBAR**2)
    couplings = 0.5 * (couplings + couplings.T)
    np.fill_diagonal(couplings, 0.0)

    logger.debug(f"Evaluated {couplings.shape[0]}x{couplings.shape[0]} couplings at mu = {mu / TWO_PI:.6g} Hz")

    return CouplingMatrix(J=couplings, mu_r=mu, e_o=odf.e_o, fingerprint=modeset_fingerprint(modeset))


def _pair_separations(positions) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    positions = np.asarray(positions, dtype=float)
    rows, cols = np.triu_indices(len(positions), k=1)
    return np.linalg.norm(positions[rows] - positions[cols], axis=1), (rows, cols)


def fit_power_law(
    couplings: CouplingMatrix, positions, fit_range: Tuple[float, float] | None = None
) -> RangeFit:
    """Slope of log |J| against log R with |J| averaged over pairs sharing a separation

    The default range runs from the nearest separation to half the largest one.
    """

    distances, (rows, cols) = _pair_separations(positions)
    if distances.size == 0:
        raise InsufficientPairs(ext_message="fewer than two ions", data={"n_separations": 0})

    if fit_range is None:
        fit_range = (float(distances.min()), float(distances.max()) / 2)
    lo, hi = fit_range

    scale = distances.min()
    keys = np.round(distances / scale, SEPARATION_DECIMALS)
    magnitudes = np.abs(couplings.J[rows, cols])

    separations, means = [], []
    for key in np.unique(keys):
        sel = keys == key
        r = float(distances[sel].mean())
        mean = float(magnitudes[sel].mean())
        if lo * (1 - 1e-9) <= r <= hi * (1 + 1e-9) and mean > 0:
            separations.append(r)
            means.append(mean)

    if len(separations) < MIN_SEPARATIONS:
        raise InsufficientPairs(
            ext_message=f"{len(separations)} distinct separations in [{lo:.3g}, {hi:.3g}] m, need {MIN_SEPARATIONS}",
            data={"n_separations": len(separations), "fit_range": (lo, hi)},
        )

    x = np.log(separations)
    y = np.log(means)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))

    return RangeFit(exponent=-float(slope), residual=residual, fit_range=(lo, hi), n_separations=len(separations))


def coupling_histogram(couplings: CouplingMatrix, bins: int = 50) -> Histogram:
    counts, edges = np.histogram(couplings.upper(), bins=bins)
    return Histogram(edges=edges, counts=counts)


def com_band_edge_check(modeset: ModeSet, branch: ModeKind | str) -> BandEdge:
    """Finds the branch mode with the largest summed ion displacement and whether it bounds the branch"""

    branch = ModeKind(branch)
    indices = modeset.indices_of(branch)
    if not indices:
        raise ValueError(f"Mode set has no <{branch.value}> modes")

    weights = [np.linalg.norm(modeset.modes[i].ion_components.sum(axis=0)) for i in indices]
    com = indices[int(np.argmax(weights))]

    freqs = modeset.frequencies[indices]
    nu = modeset.frequencies[com]
    at_max = bool(nu >= freqs.max())
    at_min = bool(nu <= freqs.min())
    is_edge = at_max or at_min

    if not is_edge:
        logger.info(f"COM mode {com} lies inside the {branch.value} branch")

    return BandEdge(branch=branch, com_index=com, is_edge=is_edge, at_maximum=at_max if is_edge else None)


def range_scan(
    modeset: ModeSet,
    odf: ODFParams,
    positions,
    detunings: Sequence[float],
    reference: float,
    fit_range: Tuple[float, float] | None = None,
) -> List[RangeScanRow]:
    """Power-law exponent for each beatnote reference + detuning, in ascending detuning order

    Repeated detunings are scanned once.
    """

    rows = []
    for detuning in np.unique(np.asarray(detunings, dtype=float)):
        detuning = float(detuning)
        drive = odf.copy(update={"mu_r": reference + detuning})
        fit = fit_power_law(coupling_matrix(modeset, drive, positions), positions, fit_range)
        logger.debug(f"Detuning {detuning / TWO_PI:.6g} Hz: a = {fit.exponent:.3f}")
        rows.append(RangeScanRow(detuning=detuning, exponent=fit.exponent, residual=fit.residual))

    logger.info(f"Scanned {len(rows)} detunings, exponents {[round(r.exponent, 3) for r in rows]}")
    return rows
