"""Run orchestration: ordered analyses, flags, error record, artifacts."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from wallforge.diagnostics import (
    FirstIntegralReport,
    FluxField,
    compute_flux,
    first_integral,
    flux_monotonicity,
)
from wallforge.energy import energy_G
from wallforge.errors import ConfigParseError, WallforgeError
from wallforge.exporter import ReportExporter
from wallforge.grid import Grid, build_grid
from wallforge.layout import OutputLayout
from wallforge.models import (
    AnalysisKind,
    DiagnosticsRecord,
    ErrorRecord,
    FluxJumpRecord,
    IntervalRecord,
    Prop1Record,
    Prop1Spec,
    Report,
    RunConfig,
    SolveRecord,
    StabilityRecord,
    SweepPoint,
    SweepRecord,
    WitnessRecord,
)
from wallforge.oracles import (
    step_wall_closed_form,
    translated_wall_energy,
    translated_wall_energy_quadrature,
)
from wallforge.stability import (
    OperatorKind,
    assemble_operator,
    cutoff_witness,
    extrapolated_step_witnesses,
    smallest_eigenpair,
)
from wallforge.wall_solver import (
    SolveResult,
    profile_distance,
    solve_convex,
    solve_newton,
    verify_solution,
)
from wallforge.weight import Weight, step_weight

logger = logging.getLogger(__name__)

FLUX_JUMP_TOLERANCE = 1e-3
EIGEN_SLACK = 1e-6
AGREEMENT_TOLERANCE = 1e-6
CENTER_SLOPE_TOLERANCE = 1e-3
MATCHING_TOLERANCE = 1e-10
SWEEP_QUADRATURE_TOLERANCE = 1e-6
WITNESS_MARGIN = 4.0


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON run configuration.

    Raises:
        ConfigParseError: If the file is unreadable, not JSON, or off-schema.
    """
    config_path = Path(path)
    try:
        text = config_path.read_text(encoding="utf-8")
        return RunConfig.model_validate_json(text)
    except (OSError, ValidationError) as exc:
        msg = f"Cannot load config {config_path}: {exc}"
        raise ConfigParseError(msg) from exc


def witness_half_length(epsilons: list[float]) -> float:
    """Smallest round domain that fits every requested cutoff."""
    return float(math.ceil(1.0 + 2.0 / min(epsilons)) + WITNESS_MARGIN)


@dataclass
class _RunState:
    """Intermediate numerics shared between analyses of one run."""

    weight: Weight
    grid: Grid
    result: SolveResult | None = None
    flux: FluxField | None = None
    integral: FirstIntegralReport | None = None
    flags: dict[str, bool] = field(default_factory=dict)


class AnalysisPipeline:
    """Runs the analyses of a :class:`RunConfig` in canonical order."""

    def run_file(self, config_path: str | Path) -> tuple[Report, Path]:
        """Load *config_path*, resolve the output folder and run.

        A config that fails to load still produces a report.json carrying
        the error record.
        """
        layout = OutputLayout(config_path)
        try:
            config = load_config(config_path)
        except ConfigParseError as exc:
            logger.error("%s", exc)
            output_dir = layout.resolve(None)
            report = Report(error=_error_record(exc))
            ReportExporter(output_dir).write_report(report)
            return report, output_dir
        output_dir = layout.resolve(config.output_dir)
        return self.run(config, output_dir), output_dir

    def run(self, config: RunConfig, output_dir: str | Path) -> Report:
        """Execute the configured analyses and write the artifacts.

        Domain errors end the run with an error record in the report.

        Args:
            config: Validated run configuration.
            output_dir: Folder for report.json and the CSV artifacts.

        Returns:
            The report, already written to *output_dir*.
        """
        exporter = ReportExporter(output_dir)
        report = Report(config=config)
        try:
            report = self._execute(config, report, exporter)
        except (WallforgeError, ValueError) as exc:
            logger.error("Run failed: %s", exc)
            report = report.model_copy(update={"error": _error_record(exc)})
        exporter.write_report(report)
        if report.error is None:
            logger.info("Run finished, exit code %d", report.exit_code())
        return report

    # -----------------------------------------------------------------------
    # Steps
    # -----------------------------------------------------------------------

    def _execute(
        self, config: RunConfig, report: Report, exporter: ReportExporter
    ) -> Report:
        weight = config.weight.to_weight()
        state = _RunState(
            weight=weight,
            grid=build_grid(weight, config.half_length, config.cells_per_unit),
        )
        analyses = config.ordered_analyses()
        needs_wall = {
            AnalysisKind.SOLVE,
            AnalysisKind.DIAGNOSTICS,
            AnalysisKind.STABILITY,
            AnalysisKind.VERIFY,
        }
        if needs_wall.intersection(analyses):
            report = self._solve(config, state, report, exporter)

        for kind in analyses:
            logger.info("Analysis: %s", kind)
            if kind is AnalysisKind.DIAGNOSTICS:
                report = self._diagnostics(state, report)
            elif kind is AnalysisKind.STABILITY:
                report = self._stability(config.prop1, state, report, exporter)
            elif kind is AnalysisKind.PROP1:
                report = self._prop1(config.prop1, state, report)
            elif kind is AnalysisKind.SWEEP:
                report = self._sweep(config, state, report)
            elif kind is AnalysisKind.VERIFY:
                report = self._verify(config, state, report)
            report = report.model_copy(
                update={"completed_analyses": [*report.completed_analyses, kind]}
            )
        return report.model_copy(update={"flags": dict(state.flags)})

    def _solve(
        self,
        config: RunConfig,
        state: _RunState,
        report: Report,
        exporter: ReportExporter,
    ) -> Report:
        result = solve_newton(state.weight, state.grid, config.solver)
        state.result = result
        state.flux = compute_flux(result.profile)
        state.integral = first_integral(result.profile)
        profile_path = exporter.write_profile(
            result.profile, state.flux, state.integral
        )
        record = SolveRecord(
            path=str(result.path),
            iterations=result.iterations,
            final_residual=result.final_residual,
            energy=energy_G(result.profile),
            node_count=state.grid.node_count,
            profile_file=profile_path.name,
        )
        return report.model_copy(update={"solve": record})

    def _diagnostics(self, state: _RunState, report: Report) -> Report:
        assert state.flux is not None and state.integral is not None
        flux = state.flux
        monotonicity = flux_monotonicity(state.weight, flux)
        record = DiagnosticsRecord(
            flux_min=float(np.min(flux.cell_flux)),
            flux_center=flux.at_center(),
            flux_jumps=[
                FluxJumpRecord(breakpoint=j.x, jump=j.jump, raw_jump=j.raw_jump)
                for j in flux.jumps
            ],
            flux_nonincreasing=monotonicity.flux_nonincreasing,
            slope_nonincreasing=monotonicity.slope_nonincreasing,
            first_integral=[
                IntervalRecord(
                    left=item.left,
                    right=item.right,
                    weight=item.weight,
                    mean=item.mean,
                    max_deviation=item.max_deviation,
                )
                for item in state.integral.per_interval
            ],
        )
        state.flags["flux_positive"] = record.flux_min > 0.0
        state.flags["flux_nonincreasing"] = monotonicity.flux_nonincreasing
        state.flags["flux_continuous"] = flux.max_jump() <= FLUX_JUMP_TOLERANCE
        if monotonicity.slope_nonincreasing is not None:
            state.flags["slope_nonincreasing"] = monotonicity.slope_nonincreasing
        return report.model_copy(update={"diagnostics": record})

    def _stability(
        self,
        spec: Prop1Spec,
        state: _RunState,
        report: Report,
        exporter: ReportExporter,
    ) -> Report:
        assert state.result is not None
        profile = state.result.profile
        records: list[StabilityRecord] = []
        for kind, pinned in (
            (OperatorKind.L0, False),
            (OperatorKind.L1, True),
            (OperatorKind.L2, False),
        ):
            op = assemble_operator(kind, profile, pin_center=pinned)
            eig = smallest_eigenpair(op)
            records.append(
                StabilityRecord(
                    operator=str(kind),
                    eigenvalue=eig.smallest_eigenvalue,
                    converged=eig.converged,
                    residual=eig.residual,
                )
            )
            state.flags[f"{kind}_converged"] = eig.converged

        unstable = records[0].eigenvalue < -EIGEN_SLACK
        state.flags["unstable"] = unstable
        if unstable:
            witnesses = [
                cutoff_witness(eps, profile, state.flux)
                for eps in sorted(spec.epsilons, reverse=True)
                if state.grid.half_length > 1.0 + 2.0 / eps
            ]
            if witnesses:
                path = exporter.write_witness(profile, witnesses)
                records[0] = records[0].model_copy(
                    update={"witness_file": path.name}
                )
                state.flags["witness_negative"] = all(
                    w.q_value < 0.0 for w in witnesses
                )
        return report.model_copy(update={"stability": records})

    def _prop1(self, spec: Prop1Spec, state: _RunState, report: Report) -> Report:
        step = step_wall_closed_form()
        half_length = witness_half_length(spec.epsilons)
        limit = step.instability_limit()
        estimates = extrapolated_step_witnesses(
            sorted(spec.epsilons, reverse=True),
            step,
            half_length,
            spec.cells_per_unit,
        )
        witnesses = [
            WitnessRecord(
                epsilon=e.epsilon,
                q_value=e.extrapolated,
                q_coarse=e.coarse,
                q_fine=e.fine,
                half_length=half_length,
            )
            for e in estimates
        ]
        record = Prop1Record(
            d=step.d,
            phi_at_1=step.phi_at_1,
            matching_defect=step.matching_defect(),
            limit=limit,
            closed_form_energy=step.energy(),
            witnesses=witnesses,
        )
        state.flags["prop1_matching"] = record.matching_defect <= MATCHING_TOLERANCE
        state.flags["prop1_witness_negative"] = all(w.q_value < 0.0 for w in witnesses)
        state.flags["prop1_witness_converging"] = _converging(witnesses, limit)

        if state.result is not None and state.weight == step_weight():
            profile = state.result.profile
            zero = state.grid.zero_index
            slope = float(
                (profile.values[zero + 1] - profile.values[zero])
                / state.grid.widths[zero]
            )
            record = record.model_copy(
                update={
                    "discrete_center_slope": slope,
                    "discrete_energy": energy_G(profile),
                }
            )
            state.flags["prop1_center_slope"] = (
                abs(slope - step.d) <= CENTER_SLOPE_TOLERANCE
            )
        return report.model_copy(update={"prop1": record})

    def _sweep(self, config: RunConfig, state: _RunState, report: Report) -> Report:
        weight = state.weight
        x0_values = config.sweep.x0_values
        with ThreadPoolExecutor() as pool:
            energies = list(
                pool.map(lambda x0: translated_wall_energy(x0, weight), x0_values)
            )
            quadratures = list(
                pool.map(
                    lambda x0: translated_wall_energy_quadrature(x0, weight),
                    x0_values,
                )
            )
        points = [
            SweepPoint(x0=x0, energy=e, quadrature=q)
            for x0, e, q in zip(x0_values, energies, quadratures)
        ]
        ordered = sorted(points, key=lambda p: p.x0)
        record = SweepRecord(
            points=points,
            strictly_decreasing=all(
                b.energy < a.energy for a, b in zip(ordered, ordered[1:])
            ),
            above_four=all(p.energy > 4.0 for p in points),
        )
        state.flags["sweep_quadrature"] = all(
            abs(p.energy - p.quadrature) <= SWEEP_QUADRATURE_TOLERANCE for p in points
        )
        state.flags["sweep_strictly_decreasing"] = record.strictly_decreasing
        state.flags["sweep_above_four"] = record.above_four
        return report.model_copy(update={"sweep": record})

    def _verify(self, config: RunConfig, state: _RunState, report: Report) -> Report:
        assert state.result is not None and report.solve is not None
        verification = verify_solution(
            state.weight,
            state.result,
            residual_tolerance=config.solver.residual_tolerance,
        )
        convex = solve_convex(state.weight, state.grid, config.solver)
        agreement = profile_distance(state.result.profile, convex.profile)
        state.flags["verification"] = verification.passed
        state.flags["cross_solver_agreement"] = agreement <= AGREEMENT_TOLERANCE
        return report.model_copy(
            update={
                "verification": verification,
                "solve": report.solve.model_copy(
                    update={"convex_agreement": agreement}
                ),
            }
        )


def _converging(witnesses: list[WitnessRecord], limit: float) -> bool:
    """Q decreases and Q/2 approaches *limit* strictly as ε shrinks.

    Witnesses come sorted by ε descending.
    """
    values = [w.q_value for w in witnesses]
    errors = [abs(0.5 * q - limit) for q in values]
    return all(b < a for a, b in zip(values, values[1:])) and all(
        b < a for a, b in zip(errors, errors[1:])
    )


def _error_record(exc: Exception) -> ErrorRecord:
    return ErrorRecord(type=type(exc).__name__, message=str(exc))
