"""CLI for wallforge using click."""

from __future__ import annotations

import logging

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from wallforge.acceptance import Mutation, verify_all
from wallforge.diagnostics import compute_flux, first_integral
from wallforge.energy import energy_G
from wallforge.errors import WallforgeError
from wallforge.exporter import ReportExporter
from wallforge.grid import DEFAULT_CELLS_PER_UNIT, DEFAULT_HALF_LENGTH, build_grid
from wallforge.oracles import step_wall_closed_form
from wallforge.pipeline import AnalysisPipeline
from wallforge.wall_solver import solve_convex, solve_newton
from wallforge.weight import weight_from_segments

console = Console()


def _setup_logging(verbose: bool) -> None:
    """Configure logging with rich handler."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_time=False)],
    )


def _float_list(
    ctx: click.Context, param: click.Parameter, value: str | None
) -> list[float]:
    """Parse a comma-separated option such as ``-1,1``."""
    if value is None or not value.strip():
        return []
    try:
        return [float(item) for item in value.split(",")]
    except ValueError as exc:
        msg = f"expected comma-separated numbers, got {value!r}"
        raise click.BadParameter(msg) from exc


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output.")
def main(verbose: bool) -> None:
    """wallforge: weighted pendulum domain walls."""
    _setup_logging(verbose)


# ---------------------------------------------------------------------------
# Config-driven commands
# ---------------------------------------------------------------------------


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
def run(config: str) -> None:
    """Run the analyses declared in a JSON CONFIG file.

    Writes report.json (and profile.csv / witness.csv when produced) to the
    resolved output directory. Exit code 0 on success, 1 on an error record,
    2 when an analysis flag failed.
    """
    console.print(f"[bold]Running:[/bold] {config}")
    report, output_dir = AnalysisPipeline().run_file(config)

    if report.completed_analyses:
        console.print(
            "[green]Completed analyses:[/green] "
            f"{', '.join(report.completed_analyses)}"
        )
    if report.solve is not None:
        console.print(f"[green]Energy:[/green] {report.solve.energy:.10f}")
    for record in report.stability:
        console.print(
            f"[green]{record.operator} smallest eigenvalue:[/green] "
            f"{record.eigenvalue:.6e}"
        )
    for name, passed in report.checks.items():
        style = "green" if passed else "red"
        console.print(f"[{style}]{name}:[/{style}] {passed}")
    for name, value in report.findings.items():
        console.print(f"[cyan]{name}:[/cyan] {value}")
    if report.error is not None:
        console.print(f"[red]{report.error.type}:[/red] {report.error.message}")
    console.print(f"[green]Output:[/green] {output_dir}")
    raise SystemExit(report.exit_code())


@main.command()
@click.option(
    "--cells-per-unit",
    type=click.IntRange(min=4),
    default=DEFAULT_CELLS_PER_UNIT,
    show_default=True,
    help="Grid resolution used by every criterion.",
)
@click.option(
    "--mutate",
    type=click.Choice([m.value for m in Mutation]),
    default=None,
    help="Inject a known defect; the affected criteria must fail.",
)
def verify(cells_per_unit: int, mutate: str | None) -> None:
    """Run the acceptance suite and print a criterion table."""
    mutation = Mutation(mutate) if mutate is not None else None
    results = verify_all(cells_per_unit, mutation)

    table = Table(title="Acceptance criteria")
    table.add_column("#", justify="right")
    table.add_column("Criterion")
    table.add_column("Result")
    table.add_column("Seconds", justify="right")
    table.add_column("Detail")
    for result in results:
        outcome = "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]"
        table.add_row(
            str(result.number),
            result.name,
            outcome,
            f"{result.seconds:.2f}",
            result.detail,
        )
    console.print(table)

    failed = sum(1 for r in results if not r.passed)
    if failed:
        console.print(f"[red]{failed} of {len(results)} criteria failed[/red]")
        raise SystemExit(2)
    console.print(f"[green]All {len(results)} criteria passed[/green]")


# ---------------------------------------------------------------------------
# Quick commands
# ---------------------------------------------------------------------------


@main.command()
@click.option(
    "--breakpoints",
    callback=_float_list,
    default="",
    help="Comma-separated breakpoints, e.g. -1,1.",
)
@click.option(
    "--values",
    "values",
    callback=_float_list,
    required=True,
    help="Comma-separated segment values, one more than breakpoints.",
)
@click.option("--half-length", type=float, default=DEFAULT_HALF_LENGTH)
@click.option(
    "--cells-per-unit", type=click.IntRange(min=4), default=DEFAULT_CELLS_PER_UNIT
)
@click.option("--convex", is_flag=True, help="Use the projected-Newton path.")
@click.option(
    "--output",
    "-o",
    type=click.Path(file_okay=False),
    default=None,
    help="Directory for profile.csv.",
)
def solve(
    breakpoints: list[float],
    values: list[float],
    half_length: float,
    cells_per_unit: int,
    convex: bool,
    output: str | None,
) -> None:
    """Solve one wall and print its energy."""
    try:
        weight = weight_from_segments(breakpoints, values)
        grid = build_grid(weight, half_length, cells_per_unit)
        solver = solve_convex if convex else solve_newton
        result = solver(weight, grid)
    except WallforgeError as exc:
        console.print(f"[red]{type(exc).__name__}:[/red] {exc}")
        raise SystemExit(1) from exc

    profile = result.profile
    flux = compute_flux(profile)
    console.print(f"[green]Path:[/green] {result.path}")
    console.print(f"[green]Nodes:[/green] {grid.node_count}")
    console.print(f"[green]Iterations:[/green] {result.iterations}")
    console.print(f"[green]Residual:[/green] {result.final_residual:.3e}")
    console.print(f"[green]Energy:[/green] {energy_G(profile):.10f}")
    console.print(f"[green]Flux at 0:[/green] {flux.at_center():.10f}")
    if output is not None:
        path = ReportExporter(output).write_profile(
            profile, flux, first_integral(profile)
        )
        console.print(f"[green]Profile:[/green] {path}")


@main.command()
def prop1() -> None:
    """Print the closed-form step-weight wall quantities."""
    try:
        step = step_wall_closed_form()
    except WallforgeError as exc:
        console.print(f"[red]{type(exc).__name__}:[/red] {exc}")
        raise SystemExit(1) from exc

    console.print(f"[green]d = phi'(0+):[/green] {step.d:.12f}")
    console.print(f"[green]phi(1):[/green] {step.phi_at_1:.12f}")
    console.print(f"[green]Matching defect:[/green] {step.matching_defect():.3e}")
    console.print(f"[green]Energy:[/green] {step.energy():.10f}")
    console.print(
        f"[green]Witness limit Q/2:[/green] {step.instability_limit():.10f}"
    )
