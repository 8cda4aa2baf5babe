import json
from enum import Enum
from pathlib import Path
from typing import Optional

import typer
from loguru import logger
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from antijam.controllers.experiment import (
    MAX_FAILURE_RATE,
    ExperimentController,
    load_results,
    run_experiment,
    summarize,
    write_json,
)
from antijam.controllers.hybrid import ao_ajhbf
from antijam.controllers.sdr import build_sdr_instance, export_sdr
from antijam.logger_config import configure_logger
from antijam.models.experiment import ExperimentSpec
from antijam.schemas.error import BaseError, InvalidExperimentSpecError
from antijam.services.matrix_io import dump_channels, dump_prior_spectra
from antijam.services.plotting import emit_plots
from antijam.settings import Settings

app = typer.Typer(help="Anti-jamming hybrid beamforming experiments.")
console = Console()


class Preset(str, Enum):
    DESK = "desk"
    PAPER = "paper"


def log_section(title: str):
    console.print(Panel(title, style="bold blue", expand=False))


def fail(error: BaseError) -> typer.Exit:
    console.print(Panel(f"{error.name}: {error.message}", style="bold red"))
    return typer.Exit(code=error.code)


def load_spec(
    path: Path,
    settings: Settings,
    seed: int | None = None,
    preset: Preset | None = None,
) -> ExperimentSpec:
    """
    Loads a spec and applies overrides.

    The base seed comes from ``--seed``, then ``ANTIJAM_SEED``, then the file.
    """
    spec = ExperimentSpec.from_yaml(path)
    updates: dict = {}
    if seed is not None:
        updates["base_seed"] = seed
    elif settings.seed is not None:
        updates["base_seed"] = settings.seed
    if preset is not None:
        updates["preset"] = preset.value
    if not updates:
        return spec
    try:
        return ExperimentSpec.model_validate(spec.model_dump() | updates)
    except ValueError as error:
        raise InvalidExperimentSpecError(str(error))


def point_of(spec: ExperimentSpec, index: int):
    points = spec.points()
    if not 0 <= index < len(points):
        raise InvalidExperimentSpecError(
            f"point index {index} out of range, spec has {len(points)} points"
        )
    return points[index]


def summary_table(summary: dict) -> Table:
    table = Table(title="Average resistible JSR")
    for column in ["axis", "value", "scheme", "trials", "mean dB", "linear dB", "sem"]:
        table.add_column(column)
    for point in summary["points"]:

        def cell(key: str) -> str:
            value = point.get(key)
            return "-" if value is None else f"{value:.2f}"

        table.add_row(
            point["axis"],
            f"{point['value']:g}",
            point["scheme"],
            str(point["trials"]),
            cell("mean_jsr_db"),
            cell("linear_mean_jsr_db"),
            cell("sem_jsr_db"),
        )
    return table


def print_verdicts(summary: dict):
    for trend in summary["trends"]:
        mark = {True: "[green]✓[/green]", False: "[red]✗[/red]"}.get(
            trend["holds"], "[yellow]-[/yellow]"
        )
        console.print(
            f"{mark} {trend['scheme']} along {trend['axis']}: {trend['verdict']} "
            f"(expected {trend['expected']})"
        )
    for comparison in summary["comparisons"]:
        console.print(
            f"  {comparison['axis']}: {comparison['a']} vs {comparison['b']} "
            f"-> {comparison['verdict']} ({comparison['pairs']} pairs)"
        )


@app.command()
def run(
    spec_file: Path = typer.Argument(..., exists=True, dir_okay=False),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Base seed."),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir"),
    preset: Optional[Preset] = typer.Option(None, "--preset"),
    no_timing: bool = typer.Option(
        False, "--no-timing", help="Write zero runtimes for reproducible files."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
):
    """Run every sweep point and trial of an experiment file."""
    settings = Settings()  # type: ignore
    configure_logger(settings, console=verbose)
    try:
        spec = load_spec(spec_file, settings, seed, preset)
        if no_timing:
            spec = spec.model_copy(update={"record_runtime": False})
        log_section(f"Running {spec.name}")
        with console.status("[bold blue]Running trials..."):
            report = run_experiment(
                spec, output_dir=out_dir, threads=threads or settings.threads
            )
    except BaseError as error:
        raise fail(error)

    console.print(summary_table(report.summary))
    print_verdicts(report.summary)
    for name, path in report.files.items():
        console.print(f"[green]✓[/green] {name}: {path}")
    if report.failure_rate > MAX_FAILURE_RATE:
        console.print(
            f"[red]✗[/red] {report.failure_rate:.1%} of runs failed, "
            f"see {report.files['manifest']}"
        )
        raise typer.Exit(code=1)


@app.command("summarize")
def summarize_command(
    results: Path = typer.Argument(..., exists=True, dir_okay=False),
    out: Optional[Path] = typer.Option(None, "--out", help="Defaults to summary.json."),
):
    """Recompute summary.json from a results.csv."""
    summary = summarize(load_results(results))
    path = write_json(summary, out or results.with_name("summary.json"))
    console.print(summary_table(summary))
    print_verdicts(summary)
    console.print(f"[green]✓[/green] summary: {path}")


@app.command()
def plot(
    summary: Path = typer.Argument(..., exists=True, dir_okay=False),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir"),
):
    """Render the SVG charts of a summary.json."""
    data = json.loads(summary.read_text("utf-8"))
    for path in emit_plots(data, out_dir or summary.parent):
        console.print(f"[green]✓[/green] plot: {path}")


@app.command("export-sdr")
def export_sdr_command(
    spec_file: Path = typer.Argument(..., exists=True, dir_okay=False),
    output: Path = typer.Argument(...),
    point: int = typer.Option(0, "--point", min=0, help="Index into the sweep points."),
    trial: int = typer.Option(0, "--trial", min=0),
    seed: Optional[int] = typer.Option(None, "--seed", min=0),
):
    """Write the relaxed transmit problem of one trial for an external SDP solver."""
    settings = Settings()  # type: ignore
    try:
        spec = load_spec(spec_file, settings, seed)
        axis, value = point_of(spec, point)
        scenario, _, priors = ExperimentController(spec).prepare(
            axis, value, trial
        )
        result = ao_ajhbf(scenario, priors, spec.ao)
        instance = build_sdr_instance(
            result.hybrid.combiners(), priors, result.q, scenario.gamma_th
        )
        path = export_sdr(instance, output)
    except BaseError as error:
        raise fail(error)
    logger.info(f"Exported SDR instance of {axis.value}={value} trial {trial}")
    console.print(f"[green]✓[/green] SDR instance at q={result.q:.4e} W: {path}")


@app.command("dump-channels")
def dump_channels_command(
    spec_file: Path = typer.Argument(..., exists=True, dir_okay=False),
    out_dir: Path = typer.Argument(...),
    point: int = typer.Option(0, "--point", min=0),
    trial: int = typer.Option(0, "--trial", min=0),
    seed: Optional[int] = typer.Option(None, "--seed", min=0),
):
    """Dump the true channels and prior spectra of one trial."""
    settings = Settings()  # type: ignore
    try:
        spec = load_spec(spec_file, settings, seed)
        axis, value = point_of(spec, point)
        scenario, channels, priors = ExperimentController(spec).prepare(
            axis, value, trial
        )
        paths = [
            dump_channels(channels, Path(out_dir) / "channels.txt"),
            dump_prior_spectra(priors, Path(out_dir) / "prior_spectra.csv"),
        ]
    except BaseError as error:
        raise fail(error)
    for path in paths:
        console.print(f"[green]✓[/green] {path}")
