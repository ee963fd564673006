""" Normal modes: quadratic eigenvalue problem, classification and quantization """

from __future__ import annotations

import enum
import logging

import numpy as np
from pydantic import BaseModel, Field, validator
from scipy import linalg
from scipy.optimize import linear_sum_assignment

from ..equilibrium.equilibrium import from_blocks
from ..error.error import DegenerateNormalization, PairingFailure, UnstableSystem
from ..model.constants import HBAR, TWO_PI
from ..model.trap import ArrayConfig
from .matrices import SystemMatrices, assemble_matrices

from typing import Dict, List, Tuple

logger = logging.getLogger(__name__)

DEFAULT_STABILITY_TOL = 1e-6
DEFAULT_PAIRING_TOL = 1e-6
DEFAULT_DEGENERACY_TOL = 1e-9
DEFAULT_NORMALIZATION_TOL = 1e-12
QEP_RESIDUAL_WARNING = 1e-8


@enum.unique
class ModeKind(str, enum.Enum):
    AXIAL = "axial"
    CYCLOTRON = "cyclotron"
    MAGNETRON = "magnetron"


KIND_ORDER = {ModeKind.AXIAL: 0, ModeKind.CYCLOTRON: 1, ModeKind.MAGNETRON: 2}


class Mode(BaseModel):
    omega: float = Field(gt=0, description="Mode frequency nu, rad/s")
    eigvec: np.ndarray = Field(description="Unit-norm eigenvector gamma solving the QEP at +nu, block order")
    energy_sign: int = Field(description="Sign of nu^2 gamma^H M gamma + gamma^H Phi gamma")
    energy_scale: float = Field(description="D = nu^2 gamma^H M gamma + gamma^H Phi gamma, kg/s^2")
    qep_residual: float = Field(ge=0, description="||(nu^2 M - i nu W - Phi) gamma|| / (||Phi|| ||gamma||)")
    kind: ModeKind | None = None
    c_norm: float | None = Field(default=None, description="Quantum normalization c, m/(J s)")
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None
    zero_point: np.ndarray | None = Field(default=None, description="N x 3 zero-point amplitudes, m")

    class Config:
        title = "Normal Mode"
        frozen = True
        arbitrary_types_allowed = True

    @validator("energy_sign")
    def energy_sign_must_be_unit(cls, v):
        if v not in (-1, 1):
            raise ValueError(f"Energy sign must be +1 or -1, got <{v}>")
        return v

    @property
    def frequency_hz(self) -> float:
        return self.omega / TWO_PI

    @property
    def signed_omega(self) -> float:
        """Frequency of the eigenpair kept for the creation operator: -nu for negative-energy modes"""
        return self.energy_sign * self.omega

    @property
    def rho0(self) -> float:
        """Mode zero-point scale hbar * c, m"""
        if self.c_norm is None:
            raise ValueError("Mode is not normalized")
        return HBAR * self.c_norm

    @property
    def ion_components(self) -> np.ndarray:
        """N x 3 complex eigenvector components"""
        return from_blocks(self.eigvec)

    @property
    def participation(self) -> np.ndarray:
        """Per-ion weight sum_nu |gamma_j nu|^2, sums to 1"""
        return np.sum(np.abs(self.ion_components) ** 2, axis=1)

    def commutator(self, mats: SystemMatrices) -> float:
        """(hbar / omega) (omega^2 alpha^H M alpha + alpha^H Phi alpha), 1 for a normalized mode"""
        if self.alpha is None:
            raise ValueError("Mode is not normalized")
        w = self.signed_omega
        a = self.alpha
        return float((HBAR / w) * np.real(w**2 * np.vdot(a, mats.M @ a) + np.vdot(a, mats.Phi @ a)))


class ModeSet(BaseModel):
    modes: List[Mode]
    n_ions: int
    stable: bool = True
    max_imag_ratio: float = Field(ge=0, description="max |Im omega| / |Re omega| over the spectrum")
    classification_ok: bool = True
    normalized: bool = False

    class Config:
        title = "Mode Set"
        frozen = True
        arbitrary_types_allowed = True

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])

    @property
    def energy_scales(self) -> np.ndarray:
        return np.array([m.energy_scale for m in self.modes])

    @property
    def eigvecs(self) -> np.ndarray:
        """3N x 3N matrix with the mode eigenvectors as columns"""
        return np.column_stack([m.eigvec for m in self.modes])

    def by_kind(self, kind: ModeKind | str) -> List[Mode]:
        kind = ModeKind(kind)
        return [m for m in self.modes if m.kind == kind]

    def indices_of(self, kind: ModeKind | str) -> List[int]:
        kind = ModeKind(kind)
        return [i for i, m in enumerate(self.modes) if m.kind == kind]

    @property
    def counts(self) -> Dict[ModeKind, int]:
        return {kind: len(self.by_kind(kind)) for kind in ModeKind}


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Unit norm with the largest component real and positive"""
    vec = vec / np.linalg.norm(vec)
    pivot = vec[np.argmax(np.abs(vec))]
    return vec * (abs(pivot) / pivot)


def _energy_form(mats: SystemMatrices, nu: float, vec: np.ndarray) -> float:
    return float(np.real(nu**2 * np.vdot(vec, mats.M @ vec) + np.vdot(vec, mats.Phi @ vec)))


def _clusters(values: np.ndarray, tol: float) -> List[np.ndarray]:
    """Index groups of sorted values whose consecutive relative spacing is within tol"""
    groups = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] <= tol * values[i - 1]:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [np.array(g) for g in groups]


def _rediagonalize(mats: SystemMatrices, nus: np.ndarray, vecs: np.ndarray, tol: float) -> np.ndarray:
    """Make every degenerate cluster orthogonal with respect to nu^2 M + Phi"""

    vecs = vecs.copy()
    for group in _clusters(nus, tol):
        if len(group) < 2:
            continue
        nu = nus[group].mean()
        basis = vecs[:, group]
        form = basis.conj().T @ (nu**2 * mats.M + mats.Phi) @ basis
        _, rotation = linalg.eigh(0.5 * (form + form.conj().T))
        vecs[:, group] = basis @ rotation
        logger.debug(f"Re-diagonalized a {len(group)}-fold degenerate cluster at {nu / TWO_PI:.6g} Hz")
    return vecs


def solve_modes(
    mats: SystemMatrices,
    stability_tol: float = DEFAULT_STABILITY_TOL,
    pairing_tol: float = DEFAULT_PAIRING_TOL,
    degeneracy_tol: float = DEFAULT_DEGENERACY_TOL,
) -> ModeSet:
    """Solves (omega^2 M - i omega W - Phi) q = 0 via the 6N companion linearization

    The companion matrix is scaled by a reference frequency so its entries are O(1).
    Of every +/- pair (nu, gamma), (-nu, gamma*) the positive-frequency member is kept.
    """

    n3 = mats.dim
    inv_mass = 1.0 / mats.masses
    m_phi = inv_mass[:, None] * mats.Phi
    m_w = inv_mass[:, None] * mats.W
    omega_ref = max(np.sqrt(np.linalg.norm(m_phi, np.inf)), np.linalg.norm(m_w, np.inf))

    companion = np.block(
        [
            [np.zeros((n3, n3)), np.eye(n3)],
            [m_phi / omega_ref**2, 1j * m_w / omega_ref],
        ]
    )
    eigvals, eigvecs = linalg.eig(companion)
    omegas = eigvals * omega_ref

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(omegas.real != 0, np.abs(omegas.imag) / np.abs(omegas.real), np.inf)
    max_ratio = float(ratios.max())

    unstable = ratios > stability_tol
    if np.any(unstable):
        offending = omegas[unstable]
        logger.error(f"{len(offending)} complex eigenvalues, max |Im/Re| = {max_ratio:.3g}")
        raise UnstableSystem(
            ext_message=", ".join(f"{w / TWO_PI:.6g} Hz" for w in offending[:6]),
            data={"eigenvalues": [(float(w.real), float(w.imag)) for w in offending], "max_imag_ratio": max_ratio},
        )

    pos = np.flatnonzero(omegas.real > 0)
    neg = np.flatnonzero(omegas.real < 0)
    if len(pos) != n3 or len(neg) != n3:
        raise PairingFailure(
            ext_message=f"{len(pos)} positive and {len(neg)} negative frequencies for {n3} degrees of freedom",
            data={"positive": len(pos), "negative": len(neg)},
        )

    cost = np.abs(omegas[pos][:, None] + np.conj(omegas[neg])[None, :])
    rows, cols = linear_sum_assignment(cost)
    mismatch = cost[rows, cols] / np.abs(omegas[pos][rows])
    if mismatch.max() > pairing_tol:
        worst = int(np.argmax(mismatch))
        raise PairingFailure(
            ext_message=f"{omegas[pos][rows][worst] / TWO_PI:.6g} Hz has no partner within {pairing_tol:g}",
            data={"omega": float(omegas[pos][rows][worst].real), "mismatch": float(mismatch[worst])},
        )

    order = np.argsort(omegas[pos].real)
    nus = omegas[pos].real[order]
    vecs = eigvecs[:n3, pos][:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    vecs = _rediagonalize(mats, nus, vecs, degeneracy_tol)

    phi_norm = np.linalg.norm(mats.Phi)
    modes = []
    for nu, raw in zip(nus, vecs.T):
        vec = _fix_phase(raw)
        energy = _energy_form(mats, nu, vec)
        residual = np.linalg.norm((nu**2 * mats.M - 1j * nu * mats.W - mats.Phi) @ vec) / phi_norm
        if residual > QEP_RESIDUAL_WARNING:
            logger.warning(f"Mode at {nu / TWO_PI:.6g} Hz has a QEP residual of {residual:.3g}")
        modes.append(
            Mode(
                omega=nu,
                eigvec=vec,
                energy_sign=1 if energy > 0 else -1,
                energy_scale=energy,
                qep_residual=residual,
            )
        )

    logger.debug(f"Solved {n3} modes, max |Im/Re| = {max_ratio:.3g}, max pairing mismatch {mismatch.max():.3g}")

    return ModeSet(modes=modes, n_ions=mats.n_ions, stable=True, max_imag_ratio=max_ratio)


def classify_modes(modeset: ModeSet, b_direction) -> ModeSet:
    """Axial when the B-axis projection exceeds 1/2, otherwise cyclotron or magnetron by energy sign"""

    b = np.asarray(b_direction, dtype=float)
    b = b / np.linalg.norm(b)

    classified = []
    for mode in modeset.modes:
        projection = float(np.sum(np.abs(mode.ion_components @ b) ** 2))
        if projection > 0.5:
            kind = ModeKind.AXIAL
        elif mode.energy_sign > 0:
            kind = ModeKind.CYCLOTRON
        else:
            kind = ModeKind.MAGNETRON
        classified.append(mode.copy(update={"kind": kind}))

    classified.sort(key=lambda m: (KIND_ORDER[m.kind], m.omega))

    n = modeset.n_ions
    counts = tuple(sum(1 for m in classified if m.kind == kind) for kind in ModeKind)
    ok = counts == (n, n, n)
    if not ok:
        logger.warning(f"Ambiguous mode classification, counts (axial, cyclotron, magnetron) = {counts}")

    return modeset.copy(update={"modes": classified, "classification_ok": ok})


def quantum_normalize(modeset: ModeSet, mats: SystemMatrices, tol: float = DEFAULT_NORMALIZATION_TOL) -> ModeSet:
    """Fills c, alpha, beta and the zero-point amplitudes

    Positive-energy modes keep (nu, c gamma); negative-energy modes take the partner
    (-nu, c gamma*) so that [a, a^dagger] = 1 holds for every mode.
    """

    mass_scale = float(mats.masses.max())
    phi_norm = np.linalg.norm(mats.Phi)

    normalized = []
    for idx, mode in enumerate(modeset.modes):
        nu = mode.omega
        energy = mode.energy_scale
        if abs(energy) < tol * (nu**2 * mass_scale + phi_norm):
            raise DegenerateNormalization(
                ext_message=f"{idx} ({mode.frequency_hz:.6g} Hz)", data={"mode": idx, "energy_scale": energy}
            )

        c = np.sqrt(nu / (HBAR * abs(energy)))
        if energy > 0:
            omega, alpha = nu, c * mode.eigvec
        else:
            omega, alpha = -nu, c * mode.eigvec.conj()
        beta = 1j * omega * (mats.M @ alpha) + 0.5 * (mats.W @ alpha)
        zero_point = from_blocks(HBAR * c * np.abs(mode.eigvec))

        normalized.append(mode.copy(update={"c_norm": c, "alpha": alpha, "beta": beta, "zero_point": zero_point}))

    return modeset.copy(update={"modes": normalized, "normalized": True})


def compute_modes(
    config: ArrayConfig,
    positions,
    stability_tol: float = DEFAULT_STABILITY_TOL,
    pairing_tol: float = DEFAULT_PAIRING_TOL,
    degeneracy_tol: float = DEFAULT_DEGENERACY_TOL,
) -> Tuple[SystemMatrices, ModeSet]:
    """Assembles, solves, classifies and normalizes the modes about an equilibrium"""

    mats = assemble_matrices(config, positions)
    modeset = solve_modes(mats, stability_tol=stability_tol, pairing_tol=pairing_tol, degeneracy_tol=degeneracy_tol)
    modeset = classify_modes(modeset, config.b_direction)
    modeset = quantum_normalize(modeset, mats)

    counts = {kind.value: n for kind, n in modeset.counts.items()}
    logger.info(f"Found {modeset.n_modes} stable modes {counts}, max |Im/Re| = {modeset.max_imag_ratio:.2g}")

    return mats, modeset
