from penningarray.equilibrium.equilibrium import solve_equilibrium
from penningarray.gates.calibration import calibrate_pair_curvature, close_entangling_phase, with_pair_scale
from penningarray.gates.gates import GateDrive, gate_trajectory, local_mode_detunings
from penningarray.model.analytics import bare_cyclotron
from penningarray.model.constants import HBAR, TWO_PI
from penningarray.model.lattice import build_lattice
from penningarray.modes.modes import compute_modes

import math

import numpy as np
import pytest

K_R = 1.75e6
PAIR = (0, 1)

# 90-site square lattice with the field and trap axes in the lattice plane
SQUARE_OMEGA_Z = TWO_PI * 2.55e6
SQUARE_FIELD = 2.2
STRETCH_TARGET = TWO_PI * 60.2e3


class TestWithPairScale:
    def test_replaces_pair_overrides(self, ion_pair):
        scaled = with_pair_scale(ion_pair, PAIR, 1.3)

        assert scaled.site_overrides == {0: 1.3, 1: 1.3}
        assert scaled.site_axial_frequency(0) == pytest.approx(math.sqrt(1.3) * ion_pair.site_axial_frequency(0))
        assert ion_pair.site_overrides == {}

        again = with_pair_scale(scaled, PAIR, 1.1)
        assert again.site_overrides == {0: 1.1, 1: 1.1}


class TestCalibratePairCurvature:
    def test_hits_target(self, ion_pair, beryllium):
        reference = 0.5 * bare_cyclotron(beryllium, 2.5)
        target = TWO_PI * 1.2e6
        calibration = calibrate_pair_curvature(ion_pair, PAIR, target, reference)

        assert 1.0 < calibration.scale < 2.0
        assert calibration.stretch_detuning == pytest.approx(target, rel=1e-6)
        assert calibration.config.site_overrides == {0: calibration.scale, 1: calibration.scale}

        eq = solve_equilibrium(calibration.config)
        _, modeset = compute_modes(calibration.config, eq.positions)
        found = local_mode_detunings(modeset, PAIR, reference)
        assert found["stretch_cyclotron"].detuning == pytest.approx(target, rel=1e-6)

    def test_stiffer_pair_lowers_detuning(self, ion_pair, beryllium):
        reference = 0.5 * bare_cyclotron(beryllium, 2.5)
        near = calibrate_pair_curvature(ion_pair, PAIR, TWO_PI * 1.2e6, reference)
        far = calibrate_pair_curvature(ion_pair, PAIR, TWO_PI * 0.8e6, reference)
        assert far.scale > near.scale

    def test_unreachable(self, ion_pair, beryllium):
        reference = 0.5 * bare_cyclotron(beryllium, 2.5)
        with pytest.raises(ValueError) as err:
            calibrate_pair_curvature(ion_pair, PAIR, TWO_PI * 5e6, reference)
        assert "not reached" in str(err.value)

    def test_positive_target(self, ion_pair, beryllium):
        with pytest.raises(ValueError):
            calibrate_pair_curvature(ion_pair, PAIR, 0.0, 0.5 * bare_cyclotron(beryllium, 2.5))


class TestCloseEntanglingPhase:
    def _drive(self, beryllium, rabi):
        return GateDrive.from_rabi(PAIR, rabi, 0.5 * bare_cyclotron(beryllium, 2.5), [K_R, 0, 0], 16e-6)

    def test_reaches_pi(self, ion_pair_modes, beryllium):
        _, _, modeset = ion_pair_modes
        closed = close_entangling_phase(modeset, self._drive(beryllium, TWO_PI * 300e3))
        assert abs(gate_trajectory(modeset, closed).accumulated_phase) == pytest.approx(math.pi, rel=1e-9)

    def test_independent_of_start(self, ion_pair_modes, beryllium):
        _, _, modeset = ion_pair_modes
        weak = close_entangling_phase(modeset, self._drive(beryllium, TWO_PI * 100e3))
        strong = close_entangling_phase(modeset, self._drive(beryllium, TWO_PI * 400e3))
        assert weak.e_o == pytest.approx(strong.e_o, rel=1e-9)

    def test_no_drive(self, ion_pair_modes, beryllium):
        _, _, modeset = ion_pair_modes
        with pytest.raises(ValueError):
            close_entangling_phase(modeset, self._drive(beryllium, 0.0))


@pytest.fixture(scope="module")
def square90_gate(beryllium):
    """Pair (0, 1) lies along the in-plane field; its curvature is tuned for a 60.2 kHz stretch detuning"""

    config = build_lattice(
        "square",
        30e-6,
        90,
        math.pi / 2,
        beryllium,
        SQUARE_OMEGA_Z,
        SQUARE_FIELD,
        overrides={0: 1.0637, 1: 1.0637},
    )
    reference = 0.5 * bare_cyclotron(beryllium, SQUARE_FIELD)
    calibration = calibrate_pair_curvature(config, PAIR, STRETCH_TARGET, reference)

    eq = solve_equilibrium(calibration.config)
    _, modeset = compute_modes(calibration.config, eq.positions)
    return calibration, modeset, reference


class TestSquare90GatePerformance:
    def test_pair_axial_frequency(self, square90_gate):
        calibration, _, _ = square90_gate

        assert np.allclose(calibration.config.b_direction, [1.0, 0.0, 0.0], atol=1e-12)
        separation = calibration.config.centers[1] - calibration.config.centers[0]
        assert np.allclose(np.cross(separation, calibration.config.b_direction), 0.0, atol=1e-18)
        assert calibration.stretch_detuning == pytest.approx(STRETCH_TARGET, rel=1e-4)
        # an 80 kHz raise over the 2.55 MHz lattice
        assert calibration.config.site_axial_frequency(0) == pytest.approx(TWO_PI * 2.63e6, rel=1e-2)

    def test_local_detunings(self, square90_gate):
        _, modeset, reference = square90_gate
        found = local_mode_detunings(modeset, PAIR, reference)

        assert found["stretch_cyclotron"].detuning == pytest.approx(STRETCH_TARGET, rel=1e-4)
        assert found["com_cyclotron"].detuning == pytest.approx(TWO_PI * 179.3e3, rel=2e-2)

    def test_zero_point(self, square90_gate):
        _, modeset, reference = square90_gate
        found = local_mode_detunings(modeset, PAIR, reference)

        assert modeset.modes[found["stretch_cyclotron"].index].rho0 == pytest.approx(96.4e-9, rel=5e-2)
        assert modeset.modes[found["com_cyclotron"].index].rho0 == pytest.approx(55.9e-9, rel=5e-2)

    def test_gate_fidelity(self, square90_gate):
        calibration, modeset, reference = square90_gate
        duration = TWO_PI / calibration.stretch_detuning
        assert 14e-6 <= duration <= 18e-6

        drive = GateDrive.from_rabi(PAIR, TWO_PI * 300e3, reference, [0.0, K_R, 0.0], duration)
        closed = close_entangling_phase(modeset, drive)
        assert 0.75 <= closed.e_o / HBAR / (TWO_PI * 300e3) <= 1.25

        trajectory = gate_trajectory(modeset, closed)
        assert abs(trajectory.entangling_phase) == pytest.approx(math.pi, abs=1e-9)
        assert trajectory.ramsey_fidelity >= 0.99
