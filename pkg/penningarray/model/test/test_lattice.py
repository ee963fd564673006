from penningarray.error.error import BadOverrideIndex, UnsupportedLattice
from penningarray.model.constants import TWO_PI
from penningarray.model.lattice import HoneycombLattice, Lattice, build_lattice

import math

import numpy as np
import pytest


def _nearest_neighbor_distance(points: np.ndarray) -> float:
    diff = points[:, None, :] - points[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    return float(dist[~np.eye(len(points), dtype=bool)].min())


class TestLattice:
    def test_abstract(self):
        with pytest.raises(TypeError, match=r"Can't instantiate abstract class.*"):
            Lattice(1.0)  # type: ignore

    def test_supported_lattices(self):
        assert set(Lattice.supported_lattices()) == {"square", "triangular", "honeycomb", "kagome"}

    def test_unsupported(self):
        with pytest.raises(UnsupportedLattice) as err:
            Lattice.get_lattice("penrose", 1.0)
        assert "penrose" in str(err.value)

    @pytest.mark.parametrize("kind", ["square", "triangular", "honeycomb", "kagome"])
    def test_nearest_neighbor(self, kind):
        d = 15e-6
        points = Lattice.get_lattice(kind, d).patch(40)

        assert points.shape == (40, 3)
        assert np.all(points[:, 2] == 0)
        assert _nearest_neighbor_distance(points) == pytest.approx(d, rel=1e-12)
        assert len(np.unique(np.round(points / d, 9), axis=0)) == 40

    def test_ordering(self):
        d = 30e-6
        points = Lattice.get_lattice("square", d).patch(5)

        assert np.allclose(points[0], 0.0)
        assert np.allclose(points[1], [-d, 0, 0])
        assert np.allclose(points[2], [0, -d, 0])
        assert np.allclose(points[4], [d, 0, 0])

    def test_honeycomb_ring(self):
        d = 15e-6
        ring = HoneycombLattice(d).patch(6)
        assert np.allclose(np.linalg.norm(ring, axis=1), d, rtol=1e-12)
        assert np.allclose(ring.sum(axis=0), 0.0, atol=1e-18)

    def test_invalid(self):
        with pytest.raises(ValueError):
            Lattice.get_lattice("square", 0.0)

        with pytest.raises(ValueError):
            Lattice.get_lattice("square", 1.0).patch(0)


class TestBuildLattice:
    def test_single_site(self, beryllium):
        config = build_lattice("square", 30e-6, 1, 0.0, beryllium, TWO_PI * 2.1e6, 2.5)
        assert config.n_ions == 1
        assert np.allclose(config.centers, 0.0)
        assert np.allclose(config.b_field, [0, 0, 2.5])

    def test_honeycomb_tilted(self, beryllium):
        tilt = math.radians(20)
        config = build_lattice("honeycomb", 15e-6, 6, tilt, beryllium, TWO_PI * 2.1e6, 2.5)

        assert config.n_ions == 6
        assert np.allclose(config.b_direction, [math.sin(tilt), 0, math.cos(tilt)])
        for site in config.sites:
            assert np.allclose(site.axis, config.b_direction)
            tensor = site.quadrupole_tensor
            assert abs(np.trace(tensor)) <= 1e-12 * np.linalg.norm(tensor)

    def test_square_90(self, beryllium):
        config = build_lattice("square", 30e-6, 90, math.pi / 2, beryllium, TWO_PI * 2.55e6, 2.2)

        assert config.n_ions == 90
        assert config.min_site_spacing == pytest.approx(30e-6, rel=1e-12)
        assert np.allclose(config.b_direction, [1, 0, 0], atol=1e-15)

    def test_independent_field(self, beryllium):
        config = build_lattice(
            "square", 30e-6, 4, 0.0, beryllium, TWO_PI * 2.1e6, 2.5, field_polar=math.radians(10), field_azimuth=0.5
        )
        assert np.allclose(config.sites[0].axis, [0, 0, 1])
        assert config.b_direction[2] == pytest.approx(math.cos(math.radians(10)))

    def test_overrides(self, beryllium):
        config = build_lattice("square", 30e-6, 4, 0.0, beryllium, TWO_PI * 2.1e6, 2.5, overrides={0: 1.1})
        assert config.site_axial_frequency(0) == pytest.approx(math.sqrt(1.1) * TWO_PI * 2.1e6, rel=1e-12)

        with pytest.raises(BadOverrideIndex):
            build_lattice("square", 30e-6, 4, 0.0, beryllium, TWO_PI * 2.1e6, 2.5, overrides={4: 1.1})
