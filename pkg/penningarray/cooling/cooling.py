""" Monte Carlo Doppler cooling of the collective modes """

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel, Field, validator
from scipy import linalg
from scipy.optimize import curve_fit

from ..equilibrium.equilibrium import EquilibriumResult, to_blocks
from ..error.error import StepSizeTooLarge, UnstableIntegration
from ..model.constants import HBAR, TWO_PI
from ..model.trap import ArrayConfig
from ..modes.matrices import assemble_matrices
from ..modes.modes import ModeSet
from ..modes.trajectory import ModalProjector
from .laser import AxializationParams, LaserParams, axialization_matrix, scattering_rate

from typing import List, Sequence, Tuple

logger = logging.getLogger(__name__)

# largest allowed dt * omega_max, in cycles
MAX_PHASE_PER_STEP = 0.02
BATCH_SIZE = 8
MAX_EVENTS_PER_STEP = 3
# with the laser off the total quanta may only oscillate, never grow past this factor
GROWTH_LIMIT = 1.5
COOLED_FRACTION = 0.5


@enum.unique
class Integrator(str, enum.Enum):
    EXPONENTIAL = "exponential"
    RK4 = "rk4"


class CoolingRecord(BaseModel):
    times: np.ndarray = Field(description="Sample times, s")
    occupations: np.ndarray = Field(description="Mean occupation per sample and mode, quanta")
    stderr: np.ndarray = Field(description="Standard error of the mean occupation, quanta")
    time_constants: np.ndarray = Field(description="Fitted exponential time constant per mode, s; nan if no fit")
    cooled: np.ndarray = Field(description="Per mode: final occupation below half the initial one")
    kinds: List[str]
    n_traj: int = Field(ge=1)
    seed: int
    dt: float = Field(gt=0)
    integrator: Integrator
    drive_frequency: float = Field(description="Axialization drive frequency, rad/s")

    class Config:
        title = "Cooling Record"
        frozen = True
        arbitrary_types_allowed = True

    @validator("times")
    def times_must_increase(cls, v):
        if np.any(np.diff(v) <= 0):
            raise ValueError("Sample times must be strictly increasing")
        return v

    @validator("occupations")
    def occupations_must_be_non_negative(cls, v):
        if np.any(v < 0):
            raise ValueError(f"Occupations must be non-negative, minimum <{v.min()}>")
        return v

    @property
    def n_modes(self) -> int:
        return self.occupations.shape[1]

    @property
    def initial(self) -> np.ndarray:
        return self.occupations[0]

    @property
    def final(self) -> np.ndarray:
        return self.occupations[-1]


def _exp_model(t, n_final, n_delta, tau):
    return n_final + n_delta * np.exp(-t / tau)


def fit_time_constants(times: np.ndarray, occupations: np.ndarray) -> np.ndarray:
    """Least-squares n(t) = n_f + (n_0 - n_f) exp(-t / tau) per mode"""

    taus = np.full(occupations.shape[1], np.nan)
    span = times[-1] - times[0]
    for idx, series in enumerate(occupations.T):
        p0 = (series[-1], series[0] - series[-1], span / 5)
        try:
            popt, _ = curve_fit(
                _exp_model,
                times - times[0],
                series,
                p0=p0,
                bounds=([-np.inf, -np.inf, span * 1e-6], [np.inf, np.inf, span * 1e3]),
                maxfev=5000,
            )
        except (RuntimeError, ValueError) as err:
            logger.debug(f"Time constant fit failed for mode {idx}: {err}")
            continue
        taus[idx] = popt[2]
    return taus


class _Propagator:
    """Read-only stepping data shared by all trajectory batches"""

    def __init__(
        self,
        config: ArrayConfig,
        equilibrium: EquilibriumResult,
        laser: LaserParams,
        axial: AxializationParams,
        dt: float,
        integrator: Integrator,
    ) -> None:
        mats = assemble_matrices(config, equilibrium.positions)
        n = config.n_ions
        self.n = n
        self.n3 = 3 * n
        self.dt = dt
        self.integrator = integrator
        self.laser = laser
        self.axial = axial
        self.masses = config.masses

        inv_mass = 1.0 / mats.masses
        self.a_w = inv_mass[:, None] * mats.W
        self.a_phi = inv_mass[:, None] * mats.Phi

        g = axialization_matrix(axial, config)
        self.a_ax = inv_mass[:, None] * g
        self.ax_offset = inv_mass * (g @ to_blocks(equilibrium.positions - config.centers))

        if integrator == Integrator.EXPONENTIAL:
            self.half_step = self._half_step_matrix()

        # recoil velocity scales per ion
        self.kick = laser.photon_momentum[None, :] / self.masses[:, None]
        self.recoil = HBAR * laser.wavenumber / self.masses

    def _half_step_matrix(self) -> np.ndarray:
        """Transpose of exp(A dt / 2) for row-vector states (q, v)"""

        n3 = self.n3
        rate = max(math.sqrt(np.linalg.norm(self.a_phi, np.inf)), np.linalg.norm(self.a_w, np.inf))
        # velocities in units of rate keep the blocks of A comparable for expm
        scaled = np.block([[np.zeros((n3, n3)), rate * np.eye(n3)], [-self.a_phi / rate, self.a_w]])
        prop = linalg.expm(0.5 * self.dt * scaled)
        scale = np.concatenate([np.ones(n3), np.full(n3, rate)])
        return (prop * scale[:, None] / scale[None, :]).T

    def _axial_acc(self, q: np.ndarray, t: float) -> np.ndarray:
        return math.cos(self.axial.drive_frequency * t) * (q @ self.a_ax.T + self.ax_offset)

    def _deriv(self, y: np.ndarray, t: float) -> np.ndarray:
        q, v = y[:, : self.n3], y[:, self.n3 :]
        acc = v @ self.a_w.T - q @ self.a_phi.T
        if self.axial.enabled:
            acc = acc + self._axial_acc(q, t)
        return np.hstack([v, acc])

    def step(self, y: np.ndarray, t: float) -> np.ndarray:
        dt = self.dt
        if self.integrator == Integrator.EXPONENTIAL:
            y = y @ self.half_step
            if self.axial.enabled:
                y[:, self.n3 :] += dt * self._axial_acc(y[:, : self.n3], t + 0.5 * dt)
            return y @ self.half_step

        k1 = self._deriv(y, t)
        k2 = self._deriv(y + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = self._deriv(y + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = self._deriv(y + dt * k3, t + dt)
        return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def scatter(self, y: np.ndarray, uniforms: np.ndarray, directions: np.ndarray) -> None:
        """Applies photon kicks in place; uniforms (B, N), directions (B, N, 3, 3)"""

        n, n3 = self.n, self.n3
        batch = y.shape[0]
        vel = y[:, n3:].reshape(batch, 3, n).transpose(0, 2, 1)

        mean = scattering_rate(self.laser, vel) * self.dt
        p0 = np.exp(-mean)
        cdf1 = p0 * (1 + mean)
        cdf2 = cdf1 + p0 * mean**2 / 2
        counts = (uniforms > p0).astype(int) + (uniforms > cdf1) + (uniforms > cdf2)
        if not counts.any():
            return

        emitted = (np.arange(MAX_EVENTS_PER_STEP)[None, None, :] < counts[..., None]).astype(float)
        unit = directions / np.linalg.norm(directions, axis=-1, keepdims=True)
        recoil = np.einsum("bne,bnea->bna", emitted, unit)

        dv = counts[..., None] * self.kick[None] + self.recoil[None, :, None] * recoil
        y[:, n3:] += dv.transpose(0, 2, 1).reshape(batch, n3)


def _check_step(modeset: ModeSet, axial: AxializationParams, dt: float) -> None:
    omega_max = max(float(modeset.frequencies.max()), axial.drive_frequency if axial.enabled else 0.0)
    if dt * omega_max > MAX_PHASE_PER_STEP * TWO_PI:
        raise StepSizeTooLarge(
            ext_message=f"dt = {dt:.3g} s exceeds {MAX_PHASE_PER_STEP} of the fastest period",
            data={"dt": dt, "omega_max": omega_max},
        )


def _initial_amplitudes(
    rng: np.random.Generator, modeset: ModeSet, quanta: np.ndarray, spread: float
) -> Tuple[np.ndarray, np.ndarray]:
    u = rng.uniform(-1.0, 1.0, size=modeset.n_modes)
    phase = rng.uniform(0.0, TWO_PI, size=modeset.n_modes)
    n0 = quanta * (1 + spread * u)
    amplitude = np.sqrt(4 * HBAR * modeset.frequencies * n0 / np.abs(modeset.energy_scales))
    return amplitude, phase


def _trajectory_rng(seed: int, idx: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, idx])))


def _run_batch(
    indices: Sequence[int],
    prop: _Propagator,
    projector: ModalProjector,
    modeset: ModeSet,
    quanta: np.ndarray,
    spread: float,
    seed: int,
    n_samples: int,
    steps_per_sample: int,
) -> np.ndarray:
    """Occupations (B, n_samples + 1, n_modes) for one batch of trajectories"""

    rngs = [_trajectory_rng(seed, idx) for idx in indices]
    batch = len(rngs)
    n = prop.n

    start = [_initial_amplitudes(rng, modeset, quanta, spread) for rng in rngs]
    q0, v0 = projector.synthesize(np.array([s[0] for s in start]), np.array([s[1] for s in start]))
    y = np.hstack([q0, v0])

    out = np.empty((batch, n_samples + 1, modeset.n_modes))
    out[:, 0] = projector.project(y[:, : prop.n3], y[:, prop.n3 :]).occupation
    reference = out[:, 0].sum(axis=1)

    t = 0.0
    for sample in range(1, n_samples + 1):
        if prop.laser.enabled:
            uniforms = np.stack([rng.random((steps_per_sample, n)) for rng in rngs], axis=1)
            directions = np.stack(
                [rng.standard_normal((steps_per_sample, n, MAX_EVENTS_PER_STEP, 3)) for rng in rngs], axis=1
            )

        for k in range(steps_per_sample):
            y = prop.step(y, t)
            t += prop.dt
            if prop.laser.enabled:
                prop.scatter(y, uniforms[k], directions[k])

        if not np.all(np.isfinite(y)):
            raise UnstableIntegration(ext_message=f"non-finite state at t = {t:.3g} s", data={"t": t})

        occupation = projector.project(y[:, : prop.n3], y[:, prop.n3 :]).occupation
        if not prop.laser.enabled and np.any(occupation.sum(axis=1) > GROWTH_LIMIT * reference + 1.0):
            raise UnstableIntegration(
                ext_message=f"mode energy grows without scattering at t = {t:.3g} s",
                data={"t": t, "total": occupation.sum(axis=1).tolist(), "initial": reference.tolist()},
            )
        out[:, sample] = occupation

    logger.debug(f"Finished trajectories {indices[0]}..{indices[-1]}")
    return out


def simulate_cooling(
    config: ArrayConfig,
    equilibrium: EquilibriumResult,
    modeset: ModeSet,
    laser: LaserParams,
    axial: AxializationParams,
    t_end: float,
    n_traj: int = 1,
    seed: int = 0,
    initial_quanta: float | Sequence[float] = 1e4,
    quanta_spread: float = 0.1,
    dt: float | None = None,
    sample_interval: float | None = None,
    threads: int = 1,
    integrator: Integrator | str = Integrator.EXPONENTIAL,
) -> CoolingRecord:
    """Averages n_traj stochastic trajectories of the laser-cooled, axialized crystal

    Each trajectory starts from mode amplitudes sampled around ``initial_quanta`` with random
    phases and draws all of its random numbers from a Philox stream keyed by (seed, index), so
    results do not depend on ``threads``. Trajectories are stepped in fixed batches.
    """

    if t_end <= 0:
        raise ValueError(f"Simulation time must be positive, got <{t_end}>")
    if n_traj < 1:
        raise ValueError(f"Need at least one trajectory, got <{n_traj}>")
    if not modeset.stable:
        raise ValueError("Cooling needs a stable mode set")

    integrator = Integrator(integrator)
    quanta = np.broadcast_to(np.asarray(initial_quanta, dtype=float), (modeset.n_modes,)).copy()
    if np.any(quanta < 0):
        raise ValueError("Initial quanta must be non-negative")

    if sample_interval is None:
        sample_interval = t_end / 200
    n_samples = max(1, int(round(t_end / sample_interval)))
    sample_interval = t_end / n_samples

    omega_max = max(float(modeset.frequencies.max()), axial.drive_frequency if axial.enabled else 0.0)
    if dt is None:
        steps_per_sample = math.ceil(sample_interval * omega_max / (MAX_PHASE_PER_STEP * TWO_PI))
    else:
        _check_step(modeset, axial, dt)
        steps_per_sample = max(1, int(round(sample_interval / dt)))
    dt = sample_interval / steps_per_sample
    _check_step(modeset, axial, dt)

    prop = _Propagator(config, equilibrium, laser, axial, dt, integrator)
    projector = ModalProjector(modeset)

    logger.info(
        f"Cooling {n_traj} trajectories over {t_end:.3g} s: {n_samples * steps_per_sample} steps of {dt:.3g} s, "
        f"{integrator.value} integrator, laser {'on' if laser.enabled else 'off'}, "
        f"axialization {'on' if axial.enabled else 'off'}"
    )

    batches = [list(range(i, min(i + BATCH_SIZE, n_traj))) for i in range(0, n_traj, BATCH_SIZE)]

    def run(indices):
        return _run_batch(indices, prop, projector, modeset, quanta, quanta_spread, seed, n_samples, steps_per_sample)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(executor.map(run, batches))

    occupations = np.concatenate(results, axis=0)
    mean = occupations.mean(axis=0)
    if n_traj > 1:
        stderr = occupations.std(axis=0, ddof=1) / math.sqrt(n_traj)
    else:
        stderr = np.zeros_like(mean)

    times = np.arange(n_samples + 1) * sample_interval
    taus = fit_time_constants(times, mean)
    cooled = mean[-1] < COOLED_FRACTION * mean[0]

    kinds = [m.kind.value if m.kind is not None else "unknown" for m in modeset.modes]
    if laser.enabled and not cooled.all():
        logger.warning(f"No cooling detected for modes {np.flatnonzero(~cooled).tolist()}")
    logger.info(f"Final occupations {np.array2string(mean[-1], precision=1)}")

    return CoolingRecord(
        times=times,
        occupations=mean,
        stderr=stderr,
        time_constants=taus,
        cooled=cooled,
        kinds=kinds,
        n_traj=n_traj,
        seed=seed,
        dt=dt,
        integrator=integrator,
        drive_frequency=axial.drive_frequency,
    )
