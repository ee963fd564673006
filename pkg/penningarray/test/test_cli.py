from penningarray.cli import EXIT_CODES, cli, exit_code
from penningarray.error.error import (
    CoincidentIons,
    ConfigError,
    InvarianceViolation,
    ManifestMismatch,
    ResonantDrive,
    StepSizeTooLarge,
    UnstableSystem,
)
from penningarray.model.constants import TWO_PI
from penningarray.modes.modes import ModeKind
from penningarray.spinspin.spinspin import ODFParams, com_band_edge_check, coupling_matrix

import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

SINGLE = """
lattice:
  kind: square
  spacing: 30 um
  n_sites: 1
b_field:
  magnitude: 2.5 T
trap:
  axial_frequency: 2.1 MHz
"""

PAIR = SINGLE.replace("n_sites: 1", "n_sites: 2")

COOLING = """
cooling:
  duration: 2 us
  trajectories: 2
  sample_interval: 1 us
"""

ODF = """
odf:
  rabi: 100 kHz
  reference: axial
  detuning: -100 kHz
  wavevector:
    direction: [0, 0, 1]
    wavenumber: 1.75 rad/um
"""

GATE = """
gate:
  pair: [0, 1]
  rabi: 0 Hz
  duration: 10 us
  wavevector:
    direction: [1, 0, 1]
    crossing_angle: 90 deg
  durations:
    start: 0 us
    stop: 20 us
    points: 5
"""


def _invoke(tmp_path, text, command, *flags, out="out"):
    path = tmp_path / "run.yaml"
    path.write_text(text)
    args = ["--log-file", str(tmp_path / "run.log"), "--config", str(path), "--out", str(tmp_path / out)]
    return CliRunner().invoke(cli, [*args, *flags, command])


class TestExitCodes:
    @pytest.mark.parametrize(
        "error, code",
        [
            (ConfigError(), 2),
            (CoincidentIons(), 3),
            (UnstableSystem(), 4),
            (InvarianceViolation(), 4),
            (StepSizeTooLarge(), 5),
            (ResonantDrive(), 6),
            (ManifestMismatch(), 1),
        ],
    )
    def test_mapping(self, error, code):
        assert exit_code(error) == code

    def test_config_group(self):
        assert EXIT_CODES[1] == 2


class TestCLI:
    def test_version(self):
        result = CliRunner().invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "penningarray" in result.output

    def test_missing_config(self, tmp_path):
        result = CliRunner().invoke(cli, ["--log-file", str(tmp_path / "run.log"), "modes"])
        assert result.exit_code == 2

    def test_validate(self, tmp_path):
        result = _invoke(tmp_path, SINGLE, "validate")
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["lattice"]["spacing"] == pytest.approx(30e-6)

    def test_validate_bad_override(self, tmp_path):
        result = _invoke(tmp_path, SINGLE + "overrides:\n  curvature:\n    3: 1.1\n", "validate")
        assert result.exit_code == 2

    def test_schema(self, tmp_path):
        result = CliRunner().invoke(cli, ["--log-file", str(tmp_path / "run.log"), "validate", "--schema"])
        assert result.exit_code == 0
        assert json.loads(result.output)["title"] == "Penning Array Run Configuration"


class TestModesCommand:
    def test_single_site(self, tmp_path):
        result = _invoke(tmp_path, SINGLE, "modes")
        assert result.exit_code == 0, result.output

        out = tmp_path / "out"
        modes = pd.read_csv(out / "modes.csv")
        assert len(modes) == 3
        assert sorted(modes["kind"]) == sorted(kind.value for kind in ModeKind)
        assert len(pd.read_csv(out / "spectrum.csv")) == 3
        equilibrium = pd.read_csv(out / "equilibrium.csv")
        assert list(equilibrium.columns) == ["site_index", "x_m", "y_m", "z_m"]
        assert len(equilibrium) == 1
        assert list(modes.columns[:4]) == ["mode_index", "kind", "freq_Hz", "energy_sign"]
        assert list(pd.read_csv(out / "spectrum.csv").columns) == ["index", "freq_Hz"]
        assert "site_index" in pd.read_csv(out / "participation.csv").columns
        assert (pd.read_csv(out / "invariance.csv")["residual"] < 1e-10).all()

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "modes"
        assert set(manifest["files"]) == {
            "equilibrium.csv",
            "modes.csv",
            "participation.csv",
            "spectrum.csv",
            "invariance.csv",
        }

    def test_unknown_key_writes_nothing(self, tmp_path):
        result = _invoke(tmp_path, SINGLE + "lattise: 3\n", "modes")
        assert result.exit_code == 2
        assert not (tmp_path / "out").exists()

    def test_byte_identical_reruns(self, tmp_path):
        assert _invoke(tmp_path, PAIR, "modes", out="a").exit_code == 0
        assert _invoke(tmp_path, PAIR, "modes", out="b").exit_code == 0
        for name in ("equilibrium.csv", "modes.csv", "invariance.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_verify(self, tmp_path):
        assert _invoke(tmp_path, PAIR, "modes").exit_code == 0

        result = _invoke(tmp_path, PAIR, "modes", "--verify")
        assert result.exit_code == 0, result.output

        (tmp_path / "out" / "modes.csv").write_text("mode_index\n")
        assert _invoke(tmp_path, PAIR, "modes", "--verify").exit_code == 1

    def test_verify_without_manifest(self, tmp_path):
        assert _invoke(tmp_path, PAIR, "modes", "--verify").exit_code == 1


class TestCoolCommand:
    def test_reproducible(self, tmp_path):
        assert _invoke(tmp_path, SINGLE + COOLING, "cool", "--seed", "5", out="a").exit_code == 0
        assert _invoke(tmp_path, SINGLE + COOLING, "cool", "--seed", "5", out="b").exit_code == 0

        name = "cooling_timeseries.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

        series = pd.read_csv(tmp_path / "a" / name)
        assert list(series.columns) == ["time_s", "n_0", "n_1", "n_2"]
        assert len(pd.read_csv(tmp_path / "a" / "cooling_summary.csv")) == 3
        assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 5

    def test_laser_off(self, tmp_path):
        text = SINGLE + COOLING + "  saturation: 0\n  axialization: 0\n"
        result = _invoke(tmp_path, text, "cool")

        assert result.exit_code == 0, result.output
        assert "No cooling detected" in result.output
        assert (pd.read_csv(tmp_path / "out" / "cooling_summary.csv")["cooled"] == 0).all()

    def test_missing_block(self, tmp_path):
        assert _invoke(tmp_path, SINGLE, "cool").exit_code == 2


class TestSpinSpinCommand:
    def test_ion_pair(self, tmp_path, ion_pair_modes):
        result = _invoke(tmp_path, PAIR + ODF, "spinspin")
        assert result.exit_code == 0, result.output

        out = tmp_path / "out"
        couplings = pd.read_csv(out / "J.csv")
        assert list(couplings.columns) == ["j", "j_prime", "R_m", "J_rad_per_s"]
        assert len(couplings) == 1
        eq, _, modeset = ion_pair_modes
        assert couplings["R_m"][0] == pytest.approx(np.linalg.norm(eq.positions[1] - eq.positions[0]), rel=1e-9)

        reference = modeset.frequencies[com_band_edge_check(modeset, "axial").com_index]
        odf = ODFParams.from_rabi(TWO_PI * 100e3, reference - TWO_PI * 100e3, [0, 0, 1.75e6])
        expected = coupling_matrix(modeset, odf, eq.positions).J[0, 1]
        assert couplings["J_rad_per_s"][0] == pytest.approx(expected, rel=1e-6)

        # two ions give a single separation, too few for a range fit
        assert (out / "rangefit.csv").read_text() == "detuning_Hz,a,residual\n"
        assert len(pd.read_csv(out / "histogram.csv")) == 50

    def test_resonant(self, tmp_path):
        result = _invoke(tmp_path, PAIR + ODF.replace("-100 kHz", "0 Hz"), "spinspin")
        assert result.exit_code == 6
        assert "resonant" in result.output


class TestGateCommand:
    def test_no_force(self, tmp_path):
        result = _invoke(tmp_path, PAIR + GATE, "gate")
        assert result.exit_code == 0, result.output

        scan = pd.read_csv(tmp_path / "out" / "gate_scan.csv")
        assert len(scan) == 5
        columns = ["t_s", "mu_Hz", "fidelity", "ramsey_fidelity", "max_residual_chi", "phase_00_11_rad"]
        assert list(scan.columns) == columns
        assert scan["fidelity"].tolist() == pytest.approx([0.25] * 5)
        assert scan["ramsey_fidelity"].tolist() == pytest.approx([0.5] * 5)
        assert (scan["max_residual_chi"] == 0).all()

        summary = pd.read_csv(tmp_path / "out" / "gate_summary.csv")
        assert summary["t_s"][0] == pytest.approx(10e-6)
        assert summary["fidelity"][0] == pytest.approx(0.25)
        assert "delta_stretch_cyclotron_Hz" in summary.columns

    def test_missing_pair(self, tmp_path):
        assert _invoke(tmp_path, PAIR + GATE.replace("  pair: [0, 1]\n", ""), "gate").exit_code == 2

    def test_pair_out_of_range(self, tmp_path):
        assert _invoke(tmp_path, PAIR + GATE.replace("[0, 1]", "[0, 5]"), "gate").exit_code == 2

    def test_calibrated_pair(self, tmp_path):
        text = PAIR + GATE.replace("rabi: 0 Hz", "rabi: 300 kHz\n  stretch_detuning: 1.2 MHz\n  close_phase: true")
        text = text.replace("direction: [1, 0, 1]", "direction: [1, 0, 0]")
        result = _invoke(tmp_path, text, "gate")
        assert result.exit_code == 0, result.output

        summary = pd.read_csv(tmp_path / "out" / "gate_summary.csv")
        assert summary["delta_stretch_cyclotron_Hz"][0] == pytest.approx(1.2e6, rel=1e-6)
        assert summary["pair_axial_Hz"][0] > 2.1e6
        assert abs(summary["phase_00_11_rad"][0]) == pytest.approx(np.pi, rel=1e-9)
        assert summary["rabi_Hz"][0] > 0

    def test_unreachable_stretch_detuning(self, tmp_path):
        text = PAIR + GATE.replace("rabi: 0 Hz", "rabi: 300 kHz\n  stretch_detuning: 5 MHz")
        assert _invoke(tmp_path, text, "gate").exit_code == 2

    def test_close_phase_without_force(self, tmp_path):
        text = PAIR + GATE.replace("rabi: 0 Hz", "rabi: 0 Hz\n  close_phase: true")
        assert _invoke(tmp_path, text, "gate").exit_code == 2
