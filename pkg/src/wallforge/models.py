"""Pydantic models for run configuration and analysis reports."""

from __future__ import annotations

from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field

from wallforge.weight import Weight, weight_from_segments

SCHEMA_VERSION = "1.1"

FINDING_FLAGS = frozenset(
    {"unstable", "witness_negative", "sweep_strictly_decreasing", "sweep_above_four"}
)

# ---------------------------------------------------------------------------
# Configuration models
# ---------------------------------------------------------------------------


class AnalysisKind(StrEnum):
    """Analyses a run can request, in execution order."""

    SOLVE = "solve"
    DIAGNOSTICS = "diagnostics"
    STABILITY = "stability"
    PROP1 = "prop1"
    SWEEP = "sweep"
    VERIFY = "verify"


ANALYSIS_ORDER: tuple[AnalysisKind, ...] = tuple(AnalysisKind)


class SolverOptions(BaseModel):
    """Newton / projected-Newton settings shared by both solve paths."""

    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(default=200, gt=0)
    residual_tolerance: float = Field(default=1e-10, gt=0.0)
    damping: float = Field(default=0.5, gt=0.0, lt=1.0)
    clamp: bool = True


class WeightSpec(BaseModel):
    """Weight as written in a config file."""

    breakpoints: list[float] = []
    values: list[float]

    def to_weight(self) -> Weight:
        return weight_from_segments(self.breakpoints, self.values)


class SweepSpec(BaseModel):
    """Translated-wall centers for the energy sweep."""

    x0_values: list[float] = Field(
        default_factory=lambda: [float(k) for k in range(1, 13)], min_length=1
    )


class Prop1Spec(BaseModel):
    """Step-weight instability check settings."""

    epsilons: list[float] = Field(default=[0.2, 0.1, 0.05], min_length=1)
    cells_per_unit: int = Field(default=200, ge=4)


class RunConfig(BaseModel):
    """Declarative description of one analysis run."""

    weight: WeightSpec
    half_length: float = Field(default=12.0, gt=0.0)
    cells_per_unit: int = Field(default=200, ge=4)
    solver: SolverOptions = SolverOptions()
    analyses: list[AnalysisKind] = Field(min_length=1)
    sweep: SweepSpec = SweepSpec()
    prop1: Prop1Spec = Prop1Spec()
    output_dir: str | None = None

    def ordered_analyses(self) -> list[AnalysisKind]:
        """Requested analyses in canonical order, duplicates removed."""
        return [kind for kind in ANALYSIS_ORDER if kind in self.analyses]


# ---------------------------------------------------------------------------
# Report records
# ---------------------------------------------------------------------------


class _Record(BaseModel):
    model_config = ConfigDict(allow_inf_nan=False)


class VerificationReport(_Record):
    """Structural checks on a solved wall; failures are flagged, not raised."""

    monotone: bool
    in_range: bool
    flux_positive: bool
    el_residual: float
    el_residual_ok: bool
    oddness_defect: float | None = None
    odd_ok: bool | None = None

    @property
    def passed(self) -> bool:
        return (
            self.monotone
            and self.in_range
            and self.flux_positive
            and self.el_residual_ok
            and self.odd_ok is not False
        )


class SolveRecord(_Record):
    path: str
    iterations: int
    final_residual: float
    energy: float
    node_count: int
    profile_file: str | None = None
    convex_agreement: float | None = None


class FluxJumpRecord(_Record):
    breakpoint: float
    jump: float
    raw_jump: float


class IntervalRecord(_Record):
    left: float
    right: float
    weight: float
    mean: float
    max_deviation: float


class DiagnosticsRecord(_Record):
    flux_min: float
    flux_center: float
    flux_jumps: list[FluxJumpRecord] = []
    flux_nonincreasing: bool
    slope_nonincreasing: bool | None = None
    first_integral: list[IntervalRecord] = []


class StabilityRecord(_Record):
    operator: str
    eigenvalue: float
    converged: bool
    residual: float
    witness_file: str | None = None


class WitnessRecord(_Record):
    """Q(η_ε) extrapolated in h, with the two grid values it came from."""

    epsilon: float
    q_value: float
    q_coarse: float
    q_fine: float
    half_length: float


class Prop1Record(_Record):
    d: float
    phi_at_1: float
    matching_defect: float
    limit: float
    closed_form_energy: float
    witnesses: list[WitnessRecord] = []
    discrete_center_slope: float | None = None
    discrete_energy: float | None = None


class SweepPoint(_Record):
    x0: float
    energy: float
    quadrature: float


class SweepRecord(_Record):
    points: list[SweepPoint]
    strictly_decreasing: bool
    above_four: bool


class ErrorRecord(BaseModel):
    """Machine-readable failure attached to a report."""

    type: str
    message: str


class Report(_Record):
    """Everything a run produces, serialized as report.json."""

    schema_version: str = SCHEMA_VERSION
    config: RunConfig | None = None
    completed_analyses: list[AnalysisKind] = []
    solve: SolveRecord | None = None
    diagnostics: DiagnosticsRecord | None = None
    stability: list[StabilityRecord] = []
    prop1: Prop1Record | None = None
    sweep: SweepRecord | None = None
    verification: VerificationReport | None = None
    flags: dict[str, bool] = {}
    error: ErrorRecord | None = None

    @property
    def findings(self) -> dict[str, bool]:
        """Flags that describe the weight rather than check the numerics."""
        return {k: v for k, v in self.flags.items() if k in FINDING_FLAGS}

    @property
    def checks(self) -> dict[str, bool]:
        return {k: v for k, v in self.flags.items() if k not in FINDING_FLAGS}

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())

    def exit_code(self) -> int:
        """0 on success, 1 on an error record, 2 on any failed check."""
        if self.error is not None:
            return 1
        return 0 if self.passed else 2


class CriterionResult(BaseModel):
    """Outcome of one acceptance criterion."""

    number: int
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0
