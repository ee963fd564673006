""" Two-qubit geometric phase gate driven by a spin-dependent optical dipole force

Within the Lamb-Dicke regime each spin branch E of the pair displaces every mode by a
coherent amplitude chi and picks up a geometric phase Phi. Both follow in closed form
from two time integrals of the drive, ``force_integral`` and ``phase_integral``.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from ..error.error import ResonantDrive
from ..model.constants import HBAR, TWO_PI
from ..modes.modes import ModeKind, ModeSet

from typing import Dict, List, Sequence, Tuple

logger = logging.getLogger(__name__)

BRANCHES = ("00", "01", "10", "11")
# spin eigenvalue per ion for each branch: +1 for |0>, -1 for |1>
BRANCH_SIGNS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)

DEFAULT_RESONANCE_GUARD = TWO_PI * 10.0
# |detuning| * t below which the phase integrals are averaged across the resonance
NEAR_RESONANCE = 1e-4
SERIES_CUTOFF = 1e-2

BELL_STATE = np.array([1.0, 0.0, 0.0, -1.0j]) / math.sqrt(2)


def _sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


def _excess_sine(x):
    """(x - sin x) / x^2"""

    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    x2 = x * x
    series = x / 6 - x * x2 / 120 + x * x2 * x2 / 5040
    return np.where(small, series, (safe - np.sin(safe)) / safe**2)


def _window(x, t):
    """int_0^t exp(i x s) ds"""
    return t * np.exp(0.5j * x * t) * _sinc(0.5 * x * t)


def _force_parts(mu, omega, t):
    a = mu - omega
    b = mu + omega
    first = -0.5 * t * np.exp(-0.5j * a * t) * _sinc(0.5 * a * t)
    second = 0.5 * t * np.exp(0.5j * b * t) * _sinc(0.5 * b * t)
    return first, second


def force_integral(mu, omega, t):
    """F(mu, omega, t) = i int_0^t exp(i omega s) sin(mu s) ds

    Finite at mu = +-omega.
    """

    first, second = _force_parts(*np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, omega, t))))
    return (first + second)[()]


def _phase_parts_direct(mu, omega, t):
    a = mu - omega
    b = mu + omega
    with np.errstate(divide="ignore", invalid="ignore"):
        i_aa = t**2 * _excess_sine(a * t)
        i_bb = -(t**2) * _excess_sine(b * t)
        k_ab = (_window(a + b, t) - _window(a, t)) / (1j * b)
        k_ba = (_window(-(a + b), t) - _window(-b, t)) / (-1j * a)
    return i_aa, i_bb, k_ab, k_ba


def _phase_parts(mu, omega, t):
    """Double integrals over 0 < s2 < s1 < t of the drive harmonics A = exp(-i a s), B = exp(i b s)

    Returns Im int A*A, Im int B*B and the complex cross terms int A*(s1) B(s2), int B*(s1) A(s2).
    """

    mu, omega, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, omega, t)))
    shape = t.shape
    mu, omega, t = (np.atleast_1d(v) for v in (mu, omega, t))
    parts = [np.array(part, copy=True) for part in _phase_parts_direct(mu, omega, t)]

    near = ((np.abs((mu - omega) * t) < NEAR_RESONANCE) | (np.abs((mu + omega) * t) < NEAR_RESONANCE)) & (t > 0)
    if near.any():
        shift = 2 * NEAR_RESONANCE / t[near]
        above = _phase_parts_direct(mu[near] + shift, omega[near], t[near])
        below = _phase_parts_direct(mu[near] - shift, omega[near], t[near])
        for part, hi, lo in zip(parts, above, below):
            part[near] = 0.5 * (hi + lo)

    for part in parts:
        part[t == 0] = 0.0
    return [part.reshape(shape) for part in parts]


def phase_integral(mu, omega, t):
    """G(mu, omega, t) = int_0^t ds1 int_0^s1 ds2 Im[f*(s1) f(s2)] with f(s) = exp(i(omega - mu)s) - exp(i(omega + mu)s)

    Away from resonance this equals
    2 t omega / (mu^2 - omega^2) + 2 mu sin((mu + omega) t) / ((mu + omega)(mu^2 - omega^2))
    - 2 mu sin((mu - omega) t) / ((mu - omega)(mu^2 - omega^2)) - omega sin(2 mu t) / (mu (mu^2 - omega^2)).
    """

    i_aa, i_bb, k_ab, k_ba = _phase_parts(mu, omega, t)
    return (i_aa + i_bb + np.imag(-k_ab - k_ba))[()]


class GateDrive(BaseModel):
    pair: Tuple[int, int]
    e_o: float = Field(ge=0, description="Force amplitude energy scale E_O, J")
    mu_r: float = Field(gt=0, description="Beatnote frequency, rad/s")
    k_r: np.ndarray = Field(description="Difference wavevector, rad/m")
    duration: float = Field(ge=0, description="Gate time, s")
    phases: np.ndarray | None = Field(default=None, description="Force phases of the two ions, rad; equal if unset")
    resonance_guard: float = Field(default=DEFAULT_RESONANCE_GUARD, gt=0, description="rad/s")

    class Config:
        title = "Gate Drive"
        frozen = True
        arbitrary_types_allowed = True

    @validator("pair")
    def pair_must_be_distinct(cls, v):
        if v[0] == v[1] or min(v) < 0:
            raise ValueError(f"Gate needs two distinct ion indices, got <{v}>")
        return v

    @validator("k_r", pre=True)
    def k_r_must_be_3_vector(cls, v):
        arr = np.asarray(v, dtype=float)
        if arr.shape != (3,) or not np.all(np.isfinite(arr)):
            raise ValueError(f"Gate wavevector must be a finite 3-vector, got <{v}>")
        return arr

    @validator("phases", pre=True)
    def phases_must_be_pair(cls, v):
        if v is None:
            return v
        arr = np.asarray(v, dtype=float)
        if arr.shape != (2,) or not np.all(np.isfinite(arr)):
            raise ValueError(f"Gate phases must be two finite numbers, got <{v}>")
        return arr

    @classmethod
    def from_rabi(cls, pair, rabi: float, mu_r: float, k_r, duration: float, **kwargs) -> GateDrive:
        return cls(pair=tuple(pair), e_o=HBAR * rabi, mu_r=mu_r, k_r=k_r, duration=duration, **kwargs)

    @property
    def pair_phases(self) -> np.ndarray:
        return np.zeros(2) if self.phases is None else self.phases


class GateTrajectory(BaseModel):
    chi: np.ndarray = Field(description="n_modes x 4 coherent displacements per branch 00, 01, 10, 11")
    phases: np.ndarray = Field(description="n_modes x 4 geometric phases per branch, rad")
    frequencies: np.ndarray = Field(description="Signed mode frequencies, rad/s")
    duration: float
    pair: Tuple[int, int]

    class Config:
        title = "Gate Trajectory"
        frozen = True
        arbitrary_types_allowed = True

    @root_validator(skip_on_failure=True)
    def shapes_must_agree(cls, values):
        chi, phases = values["chi"], values["phases"]
        if chi.shape != phases.shape or chi.ndim != 2 or chi.shape[1] != len(BRANCHES):
            raise ValueError(f"Displacements <{chi.shape}> and phases <{phases.shape}> must both be n_modes x 4")
        return values

    @property
    def branch_phases(self) -> np.ndarray:
        return self.phases.sum(axis=0)

    @property
    def accumulated_phase(self) -> float:
        """Phi_00 + Phi_11 - Phi_01 - Phi_10, unwrapped"""
        total = self.branch_phases
        return float(total[0] + total[3] - total[1] - total[2])

    @property
    def entangling_phase(self) -> float:
        """Accumulated phase wrapped to (-pi, pi]"""
        return float(math.remainder(self.accumulated_phase, TWO_PI))

    @property
    def max_residual(self) -> float:
        return float(np.abs(self.chi).max()) if self.chi.size else 0.0

    @property
    def fidelity(self) -> float:
        return bell_fidelity(self)

    @property
    def ramsey_fidelity(self) -> float:
        return bell_fidelity(self, analysis_pulse=True)


class LocalMode(BaseModel):
    index: int
    branch: ModeKind
    frequency: float = Field(description="rad/s")
    detuning: float = Field(description="Mode frequency minus the reference, rad/s")
    zero_point: float = Field(description="Mean zero-point amplitude of the pair ions, m")


class GateScanRow(BaseModel):
    duration: float
    mu_r: float
    fidelity: float
    ramsey_fidelity: float
    max_residual: float
    entangling_phase: float


def _pair_couplings(modeset: ModeSet, drive: GateDrive) -> np.ndarray:
    """k . alpha at both pair ions, n_modes x 2"""

    n = modeset.n_ions
    if max(drive.pair) >= n:
        raise ValueError(f"Gate pair <{drive.pair}> is out of range for {n} ions")

    k = drive.k_r
    couplings = np.empty((modeset.n_modes, 2), dtype=complex)
    for idx, mode in enumerate(modeset.modes):
        if mode.alpha is None:
            raise ValueError("Gates need a quantum-normalized mode set")
        for col, ion in enumerate(drive.pair):
            couplings[idx, col] = k[0] * mode.alpha[ion] + k[1] * mode.alpha[n + ion] + k[2] * mode.alpha[2 * n + ion]
    return couplings


def _check_resonance(modeset: ModeSet, drive: GateDrive) -> None:
    offending = np.flatnonzero(np.abs(modeset.frequencies - drive.mu_r) < drive.resonance_guard)
    if offending.size:
        raise ResonantDrive(
            ext_message=", ".join(str(i) for i in offending),
            data={"modes": offending.tolist(), "mu_r": drive.mu_r, "guard": drive.resonance_guard},
        )


def gate_trajectory(modeset: ModeSet, drive: GateDrive) -> GateTrajectory:
    """Displacements and phases of every mode for each spin branch at the end of the pulse

    Branch E with spin values s_j sees u_E(t) = P+ A(t) - P- B(t), P+- = sum_j s_j (k . alpha_j) exp(+-i phi_j),
    giving chi = E_O (P+ F_A + P- F_B) and Phi = (E_O^2 / 4) int int Im[u*(s1) u(s2)].
    Ions outside the pair carry no force.
    """

    _check_resonance(modeset, drive)

    q = _pair_couplings(modeset, drive)
    signs = BRANCH_SIGNS
    phases = drive.pair_phases
    plus = (q * np.exp(1j * phases)[None, :]) @ signs.T
    minus = (q * np.exp(-1j * phases)[None, :]) @ signs.T

    omega = np.array([m.signed_omega for m in modeset.modes])
    mu = np.full_like(omega, drive.mu_r)
    t = np.full_like(omega, drive.duration)

    f_a, f_b = _force_parts(mu, omega, t)
    i_aa, i_bb, k_ab, k_ba = _phase_parts(mu, omega, t)

    chi = drive.e_o * (plus * f_a[:, None] + minus * f_b[:, None])
    geometric = (
        np.abs(plus) ** 2 * i_aa[:, None]
        + np.abs(minus) ** 2 * i_bb[:, None]
        + np.imag(-plus.conj() * minus * k_ab[:, None] - minus.conj() * plus * k_ba[:, None])
    )
    geometric *= drive.e_o**2 / 4

    trajectory = GateTrajectory(chi=chi, phases=geometric, frequencies=omega, duration=drive.duration, pair=drive.pair)
    logger.debug(
        f"Gate on {drive.pair} for {drive.duration:.4g} s: entangling phase {trajectory.entangling_phase:.4f} rad, "
        f"max |chi| {trajectory.max_residual:.3g}"
    )
    return trajectory


def branch_density(trajectory: GateTrajectory) -> np.ndarray:
    """Reduced spin density matrix of the pair after tracing out the motion, initial state |++>"""

    chi = trajectory.chi
    total = trajectory.branch_phases
    norms = np.sum(np.abs(chi) ** 2, axis=0)
    overlaps = chi.T @ chi.conj()
    exponent = 1j * (total[:, None] - total[None, :]) - 0.5 * (norms[:, None] + norms[None, :]) + overlaps
    return 0.25 * np.exp(exponent)


def _analysis_rotation(sign: float) -> np.ndarray:
    """pi/2 rotation about y by -sign * pi/2 on both ions"""
    c = 1 / math.sqrt(2)
    single = np.array([[c, sign * c], [-sign * c, c]])
    return np.kron(single, single)


def bell_fidelity(trajectory: GateTrajectory, analysis_pulse: bool = False) -> float:
    """Overlap of the pair state with (|00> - i|11>)/sqrt(2)

    The undriven state |++> scores 1/4. With ``analysis_pulse`` the closing pi/2 pulse of the
    Ramsey sequence is applied first, its direction following the sign of the accumulated
    entangling phase; a product state then scores 1/2 and a maximally entangling gate 1.
    """

    rho = branch_density(trajectory)
    if analysis_pulse:
        sign = 1.0 if math.sin(np.angle(rho[1, 0])) >= 0 else -1.0
        rotation = _analysis_rotation(sign)
        rho = rotation @ rho @ rotation.T

    value = float(np.real(BELL_STATE.conj() @ rho @ BELL_STATE))
    return min(max(value, 0.0), 1.0)


def _pair_members(modeset: ModeSet, pair: Tuple[int, int], branch: ModeKind) -> Dict[str, int]:
    i, j = pair
    candidates: Dict[str, Tuple[float, int]] = {}
    for idx in modeset.indices_of(branch):
        comps = modeset.modes[idx].ion_components
        weight = float(np.sum(np.abs(comps[i]) ** 2) + np.sum(np.abs(comps[j]) ** 2))
        label = "com" if np.real(np.vdot(comps[i], comps[j])) >= 0 else "stretch"
        if label not in candidates or weight > candidates[label][0]:
            candidates[label] = (weight, idx)

    missing = {"com", "stretch"} - set(candidates)
    if missing:
        raise ValueError(f"No {', '.join(sorted(missing))} mode for pair <{pair}> in the {branch.value} branch")
    return {label: idx for label, (_, idx) in candidates.items()}


def local_mode_detunings(modeset: ModeSet, pair: Tuple[int, int], reference: float) -> Dict[str, LocalMode]:
    """Stretch and COM modes of the pair in the cyclotron and magnetron branches

    Modes are picked by their weight on the two ions; in-phase motion is COM, out-of-phase
    motion is stretch. Keys look like ``stretch_cyclotron``.
    """

    found = {}
    for branch in (ModeKind.CYCLOTRON, ModeKind.MAGNETRON):
        for label, idx in _pair_members(modeset, pair, branch).items():
            mode = modeset.modes[idx]
            zero_point = float(np.mean([np.linalg.norm(mode.zero_point[ion]) for ion in pair]))
            found[f"{label}_{branch.value}"] = LocalMode(
                index=idx,
                branch=branch,
                frequency=mode.omega,
                detuning=mode.omega - reference,
                zero_point=zero_point,
            )

    for key, mode in sorted(found.items()):
        logger.info(
            f"{key}: mode {mode.index}, detuning {mode.detuning / TWO_PI:.6g} Hz, zero point {mode.zero_point:.4g} m"
        )
    return found


def scan_gate(
    modeset: ModeSet,
    drive: GateDrive,
    durations: Sequence[float] | None = None,
    beatnotes: Sequence[float] | None = None,
) -> List[GateScanRow]:
    """Fidelity over gate durations at fixed beatnote, or over beatnotes at fixed duration"""

    if (durations is None) == (beatnotes is None):
        raise ValueError("Scan either durations or beatnotes")

    if durations is not None:
        drives = [drive.copy(update={"duration": float(t)}) for t in durations]
    else:
        drives = [drive.copy(update={"mu_r": float(mu)}) for mu in beatnotes]

    rows = []
    for step in drives:
        trajectory = gate_trajectory(modeset, step)
        rows.append(
            GateScanRow(
                duration=step.duration,
                mu_r=step.mu_r,
                fidelity=trajectory.fidelity,
                ramsey_fidelity=trajectory.ramsey_fidelity,
                max_residual=trajectory.max_residual,
                entangling_phase=trajectory.entangling_phase,
            )
        )

    best = max(rows, key=lambda row: row.ramsey_fidelity)
    logger.info(f"Scanned {len(rows)} gate settings, best Ramsey fidelity {best.ramsey_fidelity:.6f}")
    return rows
