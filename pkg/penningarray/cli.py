""" CLI. """
import logging
import os
import sys
import tempfile
from logging.config import dictConfig
from pathlib import Path

from penningarray import __version__
from penningarray.config.config import RunConfig
from penningarray.cooling.cooling import simulate_cooling
from penningarray.cooling.laser import AxializationParams, LaserParams
from penningarray.equilibrium.equilibrium import solve_equilibrium
from penningarray.error.error import ConfigError, InsufficientPairs, InvarianceViolation, PenningError
from penningarray.gates.calibration import calibrate_pair_curvature, close_entangling_phase
from penningarray.gates.gates import GateDrive, gate_trajectory, local_mode_detunings, scan_gate
from penningarray.log import get_log_config
from penningarray.model.analytics import bare_cyclotron
from penningarray.model.constants import HBAR, TWO_PI
from penningarray.model.trap import ArrayConfig
from penningarray.modes.invariance import invariance_product, invariance_sum
from penningarray.modes.modes import compute_modes
from penningarray.output.artifacts import ArtifactWriter, RunManifest, check_files, long_format, verify_against
from penningarray.spinspin.spinspin import (
    ODFParams,
    com_band_edge_check,
    coupling_histogram,
    coupling_matrix,
    range_scan,
)

import click
import numpy as np
import pandas as pd

from typing import Callable

logger = logging.getLogger("penningarray")

# exit status per error code group (abs(code) // 100)
EXIT_CODES = {1: 2, 2: 4, 3: 3, 4: 4, 5: 5, 6: 6, 7: 1}


def version_msg() -> str:
    """Return the version, location and Python powering it."""
    python_version = sys.version
    location = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    message = "penningarray %(version)s from {} (Python {})"
    return message.format(location, python_version)


def exit_code(error: PenningError) -> int:
    return EXIT_CODES.get(abs(int(error.code)) // 100, 1)


@click.group(context_settings=dict(help_option_names=["-h", "--help"]))
@click.version_option(__version__, "-V", "--version", message=version_msg())
@click.option("-v", "--verbose", is_flag=True, help="Force all log levels to debug", default=False)
@click.option(
    "--log-file",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="File to be used for logging",
)
@click.option(
    "--log-level",
    type=click.Choice(
        [
            "DEBUG",
            "INFO",
            "WARNING",
            "ERROR",
            "CRITICAL",
        ],
        case_sensitive=False,
    ),
    help="Log level",
    default="INFO",
    show_default=True,
)
@click.option(
    "-c",
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="YAML or JSON run configuration",
)
@click.option("-o", "--out", type=click.Path(file_okay=False), default=None, help="Output directory")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Random seed")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads")
@click.option(
    "--verify",
    is_flag=True,
    help="Re-run into a scratch directory and compare checksums with the manifest in the output directory",
    default=False,
)
def cli(
    log_file: str,
    log_level: str,
    verbose: bool,
    config: str | None,
    out: str | None,
    seed: int | None,
    threads: int | None,
    verify: bool,
) -> None:
    """Micro-Penning trap array simulator"""

    dictConfig(get_log_config("penningarray", log_level=log_level if not verbose else "DEBUG", log_file=log_file))
    logger.debug("Init cli succesful")


def _load_config(params: dict) -> RunConfig:
    if params["config"] is None:
        raise ConfigError(ext_message="no configuration file given, use --config")

    with open(params["config"], encoding="utf-8") as f:
        config = RunConfig.load_config(f.read())

    update = {"seed": params["seed"], "threads": params["threads"], "output": params["out"]}
    return config.copy(update={k: v for k, v in update.items() if v is not None})


def _solve(config: RunConfig, array: ArrayConfig | None = None):
    array = config.build_array() if array is None else array
    solver = config.solver
    eq = solve_equilibrium(
        array,
        tol=solver.equilibrium_tolerance,
        max_iterations=solver.max_iterations,
    )
    mats, modeset = compute_modes(array, eq.positions, stability_tol=solver.stability_tolerance)
    return array, eq, mats, modeset


def _require(block, name: str, command: str):
    if block is None:
        raise ConfigError(ext_message=f"the {command} command needs a <{name}> block")
    return block


def _execute(ctx: click.Context, command: str, runner: Callable[[RunConfig, ArtifactWriter], RunManifest]) -> None:
    params = ctx.parent.params  # type: ignore

    try:
        config = _load_config(params)
        out = Path(config.output)

        if params["verify"]:
            reference = check_files(out)
            with tempfile.TemporaryDirectory(prefix="penningarray-verify-") as scratch:
                fresh = runner(config, ArtifactWriter(scratch, command, config.config_hash(), config.seed))
            verify_against(reference, fresh)
            click.echo(click.style(f"Verified {len(fresh.files)} files in {out}", fg="green"))
            return

        manifest = runner(config, ArtifactWriter(out, command, config.config_hash(), config.seed))
        click.echo(f"Wrote {', '.join(sorted(manifest.files))} to {out}")
    except PenningError as err:
        logger.error(f"{command} failed: {err}")
        click.echo(click.style(f"Error: {err}", fg="red"), err=True)
        ctx.exit(exit_code(err))
    except ValueError as err:
        logger.error(f"{command} failed: {err}")
        click.echo(click.style(f"Error: {err}", fg="red"), err=True)
        ctx.exit(EXIT_CODES[1])


def _run_modes(config: RunConfig, writer: ArtifactWriter) -> RunManifest:
    _, eq, mats, modeset = _solve(config)

    writer.csv(
        "equilibrium.csv",
        pd.DataFrame(
            {
                "site_index": np.arange(eq.n_ions),
                "x_m": eq.positions[:, 0],
                "y_m": eq.positions[:, 1],
                "z_m": eq.positions[:, 2],
            }
        ),
    )
    writer.csv(
        "modes.csv",
        pd.DataFrame(
            {
                "mode_index": np.arange(modeset.n_modes),
                "kind": [m.kind.value for m in modeset.modes],
                "freq_Hz": modeset.frequencies / TWO_PI,
                "energy_sign": [m.energy_sign for m in modeset.modes],
                "zero_point_m": [m.rho0 for m in modeset.modes],
                "qep_residual": [m.qep_residual for m in modeset.modes],
            }
        ),
    )
    participation = np.array([m.participation for m in modeset.modes])
    writer.csv(
        "participation.csv",
        pd.DataFrame(
            {
                "mode_index": np.repeat(np.arange(modeset.n_modes), modeset.n_ions),
                "site_index": np.tile(np.arange(modeset.n_ions), modeset.n_modes),
                "participation": participation.ravel(),
            }
        ),
    )
    order = np.argsort(modeset.frequencies, kind="stable")
    writer.csv(
        "spectrum.csv",
        pd.DataFrame({"index": np.arange(modeset.n_modes), "freq_Hz": modeset.frequencies[order] / TWO_PI}),
    )

    checks = {"sum": invariance_sum(modeset, mats), "product": invariance_product(modeset, mats)}
    writer.csv(
        "invariance.csv",
        pd.DataFrame(
            {
                "check": list(checks),
                "lhs": [c.lhs for c in checks.values()],
                "rhs": [c.rhs for c in checks.values()],
                "residual": [c.residual for c in checks.values()],
            }
        ),
    )
    manifest = writer.finish()

    threshold = config.solver.invariance_threshold
    failed = {name: c.residual for name, c in checks.items() if c.residual > threshold}
    if failed:
        raise InvarianceViolation(ext_message=f"{failed} > {threshold:g}", data=failed)

    return manifest


def _run_cool(config: RunConfig, writer: ArtifactWriter) -> RunManifest:
    cooling = _require(config.cooling, "cooling", "cool")
    array, eq, _, modeset = _solve(config)
    species = config.ion_species

    laser = LaserParams.for_species(species, cooling.beam_direction, cooling.detuning, cooling.saturation)
    axial = AxializationParams.from_fraction(
        cooling.axialization, array, cooling.axialization_frequency, cooling.length_scale
    )
    record = simulate_cooling(
        array,
        eq,
        modeset,
        laser,
        axial,
        t_end=cooling.duration,
        n_traj=cooling.trajectories,
        seed=config.seed,
        initial_quanta=cooling.initial_quanta,
        quanta_spread=cooling.quanta_spread,
        dt=cooling.time_step,
        sample_interval=cooling.sample_interval,
        threads=config.threads,
        integrator=cooling.integrator,
    )

    series = pd.DataFrame(record.occupations, columns=[f"n_{i}" for i in range(record.n_modes)])
    series.insert(0, "time_s", record.times)
    writer.csv("cooling_timeseries.csv", series)
    writer.csv(
        "cooling_summary.csv",
        pd.DataFrame(
            {
                "mode_index": np.arange(record.n_modes),
                "kind": record.kinds,
                "freq_Hz": modeset.frequencies / TWO_PI,
                "tau_s": record.time_constants,
                "n_initial": record.initial,
                "n_final": record.final,
                "stderr_final": record.stderr[-1],
                "cooled": record.cooled.astype(int),
            }
        ),
    )

    if not record.cooled.any():
        logger.warning("No cooling detected in any mode")
        click.echo(click.style("No cooling detected", fg="yellow"), err=True)

    return writer.finish()


def _run_spinspin(config: RunConfig, writer: ArtifactWriter) -> RunManifest:
    block = _require(config.odf, "odf", "spinspin")
    _, eq, _, modeset = _solve(config)

    edge = com_band_edge_check(modeset, block.reference)
    reference = float(modeset.frequencies[edge.com_index])
    odf = ODFParams.from_rabi(
        block.rabi,
        reference + block.detuning,
        block.wavevector.vector(config.ion_species),
        phases=block.ion_phases(eq.n_ions),
        resonance_guard=block.resonance_guard,
    )
    couplings = coupling_matrix(modeset, odf, eq.positions)

    records = long_format(couplings.J, ["j", "j_prime", "J_rad_per_s"])
    first, second = records["j"].to_numpy(), records["j_prime"].to_numpy()
    separations = np.linalg.norm(eq.positions[first] - eq.positions[second], axis=1)
    records.insert(2, "R_m", separations)
    writer.csv("J.csv", records)

    try:
        fits = range_scan(modeset, odf, eq.positions, [block.detuning, *block.scan], reference, block.fit_range)
    except InsufficientPairs as err:
        logger.warning(f"Skipping the range fit: {err}")
        fits = []
    writer.csv(
        "rangefit.csv",
        pd.DataFrame(
            {
                "detuning_Hz": [row.detuning / TWO_PI for row in fits],
                "a": [row.exponent for row in fits],
                "residual": [row.residual for row in fits],
            },
            dtype=float,
        ),
    )

    hist = coupling_histogram(couplings, bins=block.histogram_bins)
    writer.csv(
        "histogram.csv",
        pd.DataFrame({"bin_left": hist.edges[:-1], "bin_right": hist.edges[1:], "count": hist.counts}),
    )

    return writer.finish()


def _run_gate(config: RunConfig, writer: ArtifactWriter) -> RunManifest:
    block = _require(config.gate, "gate", "gate")
    species = config.ion_species
    b0 = config.b_field.magnitude
    mu_r = block.mu_r(species, b0)

    array = config.build_array()
    if block.stretch_detuning is not None:
        solver = config.solver
        try:
            calibration = calibrate_pair_curvature(
                array,
                block.pair,
                block.stretch_detuning,
                mu_r,
                tol=solver.equilibrium_tolerance,
                max_iterations=solver.max_iterations,
                stability_tol=solver.stability_tolerance,
            )
        except ValueError as err:
            raise ConfigError(ext_message=str(err))
        array = calibration.config
    array, _, _, modeset = _solve(config, array)

    drive = GateDrive.from_rabi(
        block.pair,
        block.rabi,
        mu_r,
        block.wavevector.vector(species),
        block.duration,
        phases=block.phases,
        resonance_guard=block.resonance_guard,
    )
    if block.close_phase:
        try:
            drive = close_entangling_phase(modeset, drive)
        except ValueError as err:
            raise ConfigError(ext_message=str(err))
    if block.beatnotes is not None:
        rows = scan_gate(modeset, drive, beatnotes=block.beatnotes.values())
    else:
        durations = block.durations.values() if block.durations is not None else [block.duration]
        rows = scan_gate(modeset, drive, durations=durations)

    writer.csv(
        "gate_scan.csv",
        pd.DataFrame(
            {
                "t_s": [r.duration for r in rows],
                "mu_Hz": [r.mu_r / TWO_PI for r in rows],
                "fidelity": [r.fidelity for r in rows],
                "ramsey_fidelity": [r.ramsey_fidelity for r in rows],
                "max_residual_chi": [r.max_residual for r in rows],
                "phase_00_11_rad": [r.entangling_phase for r in rows],
            }
        ),
    )

    trajectory = gate_trajectory(modeset, drive)
    best = max(rows, key=lambda r: r.ramsey_fidelity)
    summary = {
        "pair_i": block.pair[0],
        "pair_j": block.pair[1],
        "t_s": drive.duration,
        "mu_Hz": drive.mu_r / TWO_PI,
        "rabi_Hz": drive.e_o / HBAR / TWO_PI,
        "pair_axial_Hz": array.site_axial_frequency(block.pair[0]) / TWO_PI,
        "fidelity": trajectory.fidelity,
        "ramsey_fidelity": trajectory.ramsey_fidelity,
        "max_residual_chi": trajectory.max_residual,
        "phase_00_11_rad": trajectory.entangling_phase,
        "best_t_s": best.duration,
        "best_mu_Hz": best.mu_r / TWO_PI,
        "best_ramsey_fidelity": best.ramsey_fidelity,
    }
    try:
        local = local_mode_detunings(modeset, block.pair, 0.5 * bare_cyclotron(species, b0))
    except ValueError as err:
        logger.warning(f"Local modes of the pair not found: {err}")
        local = {}
    for key, mode in sorted(local.items()):
        summary[f"delta_{key}_Hz"] = mode.detuning / TWO_PI
        summary[f"zero_point_{key}_m"] = mode.zero_point
        summary[f"rho0_{key}_m"] = modeset.modes[mode.index].rho0
    writer.csv("gate_summary.csv", pd.DataFrame([summary]))

    return writer.finish()


@cli.command()
@click.pass_context
def modes(ctx: click.Context) -> None:
    """Equilibrium, normal modes and invariance checks"""
    _execute(ctx, "modes", _run_modes)


@cli.command()
@click.pass_context
def cool(ctx: click.Context) -> None:
    """Stochastic Doppler cooling with axialization"""
    _execute(ctx, "cool", _run_cool)


@cli.command()
@click.pass_context
def spinspin(ctx: click.Context) -> None:
    """Ising couplings, range fit and coupling histogram"""
    _execute(ctx, "spinspin", _run_spinspin)


@cli.command()
@click.pass_context
def gate(ctx: click.Context) -> None:
    """Two-qubit gate fidelity scan"""
    _execute(ctx, "gate", _run_gate)


@cli.command()
@click.pass_context
@click.option("--schema", is_flag=True, help="Print the JSON schema instead of the configuration", default=False)
def validate(ctx: click.Context, schema: bool) -> None:
    """Check a configuration and print it normalized to SI units"""

    if schema:
        click.echo(RunConfig.schema_json(indent=2))
        return

    try:
        config = _load_config(ctx.parent.params)  # type: ignore
        array = config.build_array()
    except PenningError as err:
        click.echo(click.style(f"Error: {err}", fg="red"), err=True)
        ctx.exit(exit_code(err))

    logger.info(f"Configuration is valid: {array.n_ions} sites")
    click.echo(config.normalized_json(indent=2))


if __name__ == "__main__":
    cli(auto_envvar_prefix="PENNING")
