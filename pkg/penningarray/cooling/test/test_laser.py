from penningarray.cooling.laser import (
    AxializationParams,
    LaserParams,
    axialization_force,
    axialization_matrix,
    default_drive_frequency,
    scattering_rate,
)
from penningarray.equilibrium.equilibrium import to_blocks
from penningarray.model.constants import TWO_PI
from penningarray.model.lattice import build_lattice

import math

import numpy as np
import pytest
from pydantic import ValidationError

OMEGA_Z = TWO_PI * 2.1e6


@pytest.fixture
def resonant_beam(beryllium):
    return LaserParams.for_species(beryllium, [1, 0, 0], detuning=0.0, saturation=8.0)


class TestLaserParams:
    def test_for_species(self, beryllium):
        laser = LaserParams.for_species(beryllium, [3, 4, 0])
        assert laser.wavenumber == pytest.approx(TWO_PI / 313e-9, rel=1e-12)
        assert laser.k_vector[0] / laser.k_vector[1] == pytest.approx(0.75)
        assert laser.detuning == pytest.approx(-beryllium.natural_linewidth / 2)
        assert laser.saturation == 8.0
        assert laser.enabled

    def test_list_wavevector(self, beryllium):
        k = TWO_PI / 313e-9
        laser = LaserParams(
            k_vector=[k, 0, 0],
            detuning=0.0,
            saturation=1.0,
            linewidth=beryllium.natural_linewidth,
            wavelength=313e-9,
        )
        assert isinstance(laser.k_vector, np.ndarray)
        assert laser.wavenumber == pytest.approx(k, rel=1e-12)

    def test_wavelength_mismatch(self, beryllium):
        with pytest.raises(ValidationError) as err:
            LaserParams(
                k_vector=[1e7, 0, 0],
                detuning=0.0,
                saturation=1.0,
                linewidth=beryllium.natural_linewidth,
                wavelength=313e-9,
            )
        assert "does not match" in str(err.value)

    def test_negative_saturation(self, beryllium):
        with pytest.raises(ValidationError):
            LaserParams.for_species(beryllium, [1, 0, 0], saturation=-1.0)

    def test_zero_direction(self, beryllium):
        with pytest.raises(ValueError):
            LaserParams.for_species(beryllium, [0, 0, 0])


class TestScatteringRate:
    def test_saturation_limit(self, beryllium):
        laser = LaserParams.for_species(beryllium, [0, 0, 1], detuning=0.0, saturation=1e12)
        assert scattering_rate(laser, np.zeros(3)) == pytest.approx(beryllium.natural_linewidth / 2, rel=1e-9)

    def test_on_resonance(self, resonant_beam, beryllium):
        expected = beryllium.natural_linewidth / 2 * 8 / 9
        assert scattering_rate(resonant_beam, np.zeros(3)) == pytest.approx(expected, rel=1e-12)

    def test_doppler_compensation(self, beryllium, resonant_beam):
        laser = LaserParams.for_species(beryllium, [1, 1, 0], saturation=8.0)
        velocity = laser.detuning * laser.k_vector / laser.wavenumber**2
        assert scattering_rate(laser, velocity) == pytest.approx(scattering_rate(resonant_beam, np.zeros(3)))

    def test_red_detuning_prefers_counter_propagating(self, beryllium):
        laser = LaserParams.for_species(beryllium, [1, 0, 0])
        towards = scattering_rate(laser, [-1.0, 0, 0])
        away = scattering_rate(laser, [1.0, 0, 0])
        assert towards > away

    def test_batched(self, resonant_beam):
        rates = scattering_rate(resonant_beam, np.zeros((4, 6, 3)))
        assert rates.shape == (4, 6)

    def test_laser_off(self, beryllium):
        laser = LaserParams.for_species(beryllium, [1, 0, 0], saturation=0.0)
        assert not laser.enabled
        assert scattering_rate(laser, [0.3, 0.0, 0.0]) == 0.0


class TestAxialization:
    def test_zero_amplitude(self, single_ion):
        axial = AxializationParams(amplitude=0.0, drive_frequency=TWO_PI * 4e6)
        site = single_ion.sites[0]
        force = axialization_force(axial, site, site.center + np.array([1e-6, 2e-6, 0.5e-6]), 1e-7)
        assert np.all(force == 0)
        assert not axial.enabled

    def test_node_at_center(self, single_ion):
        axial = AxializationParams(amplitude=0.1, drive_frequency=TWO_PI * 4e6)
        site = single_ion.sites[0]
        assert np.all(axialization_force(axial, site, site.center, 0.0) == 0)

    def test_quadrupole_form(self, single_ion):
        axial = AxializationParams(amplitude=0.1, drive_frequency=TWO_PI * 4e6, length_scale=50e-6)
        site = single_ion.sites[0]
        force = axialization_force(axial, site, [1e-6, 2e-6, 3e-6], 0.0)

        scale = -single_ion.charge * 2 * 0.1 / 50e-6**2
        assert force == pytest.approx(scale * np.array([1e-6, -2e-6, 0.0]), rel=1e-12)

    def test_swap_flips_sign(self, single_ion):
        axial = AxializationParams(amplitude=0.1, drive_frequency=TWO_PI * 4e6)
        site = single_ion.sites[0]
        a, b = 1e-6, 2.5e-6
        force = axialization_force(axial, site, [a, b, 0.0], 0.0)
        swapped = axialization_force(axial, site, [b, a, 0.0], 0.0)
        assert swapped[0] == pytest.approx(-force[1])
        assert swapped[1] == pytest.approx(-force[0])

    def test_oscillates(self, single_ion):
        axial = AxializationParams(amplitude=0.1, drive_frequency=TWO_PI * 4e6)
        site = single_ion.sites[0]
        half_period = math.pi / axial.drive_frequency
        f0 = axialization_force(axial, site, [1e-6, 0, 0], 0.0)
        f1 = axialization_force(axial, site, [1e-6, 0, 0], half_period)
        assert f1 == pytest.approx(-f0)

    def test_from_fraction(self, single_ion, beryllium):
        axial = AxializationParams.from_fraction(0.03, single_ion)
        curvature = beryllium.mass * OMEGA_Z**2 / beryllium.charge
        assert axial.curvature == pytest.approx(0.03 * curvature, rel=1e-12)
        # aligned field: omega_+ + omega_- equals the bare cyclotron frequency
        assert axial.drive_frequency == pytest.approx(beryllium.charge * 2.5 / beryllium.mass, rel=1e-9)

    def test_negative_fraction(self, single_ion):
        with pytest.raises(ValueError):
            AxializationParams.from_fraction(-0.1, single_ion, drive_frequency=TWO_PI * 4e6)

    def test_drive_with_tilted_field(self, beryllium):
        theta = math.radians(20)
        config = build_lattice("square", 30e-6, 1, 0.0, beryllium, OMEGA_Z, 2.5, field_polar=theta)

        omega_c = config.charge * 2.5 / beryllium.mass
        s2, c2 = math.sin(theta) ** 2, math.cos(theta) ** 2
        e2 = omega_c**2 * OMEGA_Z**2 * (c2 - 0.5 * s2) - 0.75 * OMEGA_Z**4
        roots = np.sort(np.sqrt(np.roots([1.0, -(omega_c**2), e2, -(OMEGA_Z**6) / 4]).real))

        drive = default_drive_frequency(config)
        assert drive == pytest.approx(roots[0] + roots[2], rel=1e-8)
        assert drive > omega_c

    def test_matrix_matches_force(self, honeycomb6):
        axial = AxializationParams(amplitude=0.2, drive_frequency=TWO_PI * 4.27e6)
        rng = np.random.default_rng(5)
        pos = honeycomb6.centers + rng.normal(scale=1e-6, size=(6, 3))

        expected = np.array(
            [
                axialization_force(axial, site, r, 0.0, charge=honeycomb6.charge)
                for site, r in zip(honeycomb6.sites, pos)
            ]
        )
        matrix = axialization_matrix(axial, honeycomb6)
        got = matrix @ to_blocks(pos - honeycomb6.centers)
        assert np.allclose(got, to_blocks(expected), rtol=0, atol=1e-12 * np.abs(expected).max())

    def test_tilted_site_frame(self, honeycomb6):
        """No force along the confining axis of a tilted site"""

        axial = AxializationParams(amplitude=0.2, drive_frequency=TWO_PI * 4.27e6)
        site = honeycomb6.sites[2]
        force = axialization_force(axial, site, site.center + 1e-6 * np.array([0.3, -0.7, 0.9]), 0.0)
        assert abs(force @ site.axis) < 1e-12 * np.linalg.norm(force)
