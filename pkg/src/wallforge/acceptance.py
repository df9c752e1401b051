"""Self-test suite: every acceptance criterion as a pass/fail record."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from enum import StrEnum
from functools import cached_property

import numpy as np

from wallforge.diagnostics import compute_flux, first_integral, flux_monotonicity
from wallforge.energy import (
    Profile,
    energy_G,
    gradient_G,
    planar_energy,
    planar_map,
)
from wallforge.errors import WallforgeError
from wallforge.grid import DEFAULT_HALF_LENGTH, Grid, build_grid
from wallforge.models import CriterionResult
from wallforge.oracles import (
    StepWallClosedForm,
    homogeneous_wall,
    step_wall_closed_form,
    translated_wall_energy,
    translated_wall_energy_quadrature,
)
from wallforge.stability import (
    OperatorKind,
    assemble_operator,
    extrapolated_step_witnesses,
    hardy_split,
    planar_variation,
    second_variation_T,
    smallest_eigenpair,
)
from wallforge.wall_solver import (
    SolveResult,
    profile_distance,
    solve_convex,
    solve_newton,
    verify_solution,
)
from wallforge.weight import (
    Weight,
    homogeneous_weight,
    step_weight,
    weight_from_segments,
)

logger = logging.getLogger(__name__)

WITNESS_EPSILONS = (0.2, 0.1, 0.05)
WITNESS_HALF_LENGTH = 45.0
WITNESS_CELLS_PER_UNIT = 200
MESH_LEVELS = (100, 200, 400)
SEED = 20240917


class Mutation(StrEnum):
    """Deliberate defects injected to check that the suite notices."""

    L0_SIGN = "l0-sign"


def even_weight() -> Weight:
    """Even weight non-decreasing on (0, ∞): 2 outside (-1, 1), 1 inside."""
    return weight_from_segments([-1.0, 1.0], [2.0, 1.0, 2.0])


class AcceptanceSuite:
    """Thirteen criteria sharing cached walls at one resolution."""

    def __init__(
        self, cells_per_unit: int = 200, mutation: Mutation | None = None
    ) -> None:
        self.cells_per_unit = cells_per_unit
        self.mutation = mutation
        self._rng = np.random.default_rng(SEED)

    # -- shared fixtures ---------------------------------------------------

    @cached_property
    def weights(self) -> dict[str, Weight]:
        return {
            "homogeneous": homogeneous_weight(),
            "step": step_weight(),
            "even": even_weight(),
        }

    @cached_property
    def grids(self) -> dict[str, Grid]:
        return {
            name: build_grid(w, DEFAULT_HALF_LENGTH, self.cells_per_unit)
            for name, w in self.weights.items()
        }

    @cached_property
    def walls(self) -> dict[str, SolveResult]:
        return {
            name: solve_newton(w, self.grids[name])
            for name, w in self.weights.items()
        }

    @cached_property
    def step_form(self) -> StepWallClosedForm:
        return step_wall_closed_form()

    @property
    def _coarse_cells(self) -> int:
        return max(4, self.cells_per_unit // 2)

    def _l0_eigenvalue(self, name: str) -> float:
        op = assemble_operator(
            OperatorKind.L0,
            self.walls[name].profile,
            flip_potential=self.mutation is Mutation.L0_SIGN,
        )
        return smallest_eigenpair(op).smallest_eigenvalue

    def _smooth_field(self, grid: Grid, *, pinned: bool) -> np.ndarray:
        """Random smooth nodal field vanishing at ±L (and at 0 if pinned)."""
        x = grid.nodes / grid.half_length
        modes = np.arange(1, 7)
        coefficients = self._rng.normal(size=modes.size) / modes
        field = np.sin(np.pi * np.outer(x + 1.0, modes) / 2.0) @ coefficients
        field *= 1.0 - x**2
        if pinned:
            field *= x
        return field

    # -- runner ------------------------------------------------------------

    def criteria(self) -> list[tuple[str, Callable[[], tuple[bool, str]]]]:
        return [
            ("Homogeneous wall accuracy", self.homogeneous_accuracy),
            ("Homogeneous zero mode", self.homogeneous_zero_mode),
            ("Step-weight consistency", self.step_consistency),
            ("Step-weight instability", self.step_instability),
            ("Stable regime", self.stable_regime),
            ("Cross-solver uniqueness", self.cross_solver),
            ("Discrete Hardy identity", self.hardy_identity),
            ("First integrals", self.first_integrals),
            ("Flux laws", self.flux_laws),
            ("Nonexistence sweep", self.nonexistence_sweep),
            ("Gradient correctness", self.gradient_correctness),
            ("Second-variation consistency", self.second_variation),
            ("Mesh convergence", self.mesh_convergence),
        ]

    def run(self) -> list[CriterionResult]:
        results: list[CriterionResult] = []
        for number, (name, check) in enumerate(self.criteria(), start=1):
            start = time.perf_counter()
            try:
                passed, detail = check()
            except WallforgeError as exc:
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            elapsed = time.perf_counter() - start
            outcome = "PASS" if passed else "FAIL"
            logger.info("Criterion %d %s: %s", number, name, outcome)
            results.append(
                CriterionResult(
                    number=number,
                    name=name,
                    passed=passed,
                    detail=detail,
                    seconds=elapsed,
                )
            )
        return results

    # -- criteria ----------------------------------------------------------

    def homogeneous_accuracy(self) -> tuple[bool, str]:
        profile = self.walls["homogeneous"].profile
        exact = homogeneous_wall(0.0).phi(profile.grid.nodes)
        distance = float(np.max(np.abs(profile.values - exact)))
        energy = energy_G(profile)
        passed = distance <= 1e-3 and abs(energy - 4.0) <= 1e-3
        return passed, f"sup|phi - exact| = {distance:.2e}, G = {energy:.8f}"

    def homogeneous_zero_mode(self) -> tuple[bool, str]:
        profile = self.walls["homogeneous"].profile
        op = assemble_operator(
            OperatorKind.L0,
            profile,
            flip_potential=self.mutation is Mutation.L0_SIGN,
        )
        eig = smallest_eigenpair(op)
        slope = compute_flux(profile).nodal()
        vector = eig.eigenvector
        cosine = float(
            abs(vector @ slope) / (np.linalg.norm(vector) * np.linalg.norm(slope))
        )
        value = eig.smallest_eigenvalue
        passed = abs(value) <= 1e-4 and cosine >= 0.999
        return passed, f"lambda_min = {value:.2e}, cosine = {cosine:.6f}"

    def step_consistency(self) -> tuple[bool, str]:
        profile = self.walls["step"].profile
        grid = profile.grid
        zero = grid.zero_index
        d = self.step_form.d
        rise = profile.values[zero + 1] - profile.values[zero]
        slope = float(rise / grid.widths[zero])
        half_flux = 0.5 * compute_flux(profile).at_center()
        spread = max(abs(d - slope), abs(d - half_flux), abs(slope - half_flux))
        defect = self.step_form.matching_defect()
        passed = spread <= 1e-3 and defect <= 1e-10
        return passed, f"d = {d:.10f}, spread = {spread:.2e}, matching = {defect:.1e}"

    def step_instability(self) -> tuple[bool, str]:
        value = self._l0_eigenvalue("step")
        limit = self.step_form.instability_limit()
        estimates = extrapolated_step_witnesses(
            WITNESS_EPSILONS,
            self.step_form,
            WITNESS_HALF_LENGTH,
            WITNESS_CELLS_PER_UNIT,
        )
        halves = [0.5 * e.extrapolated for e in estimates]
        errors = [abs(q - limit) for q in halves]
        passed = (
            value < 0.0
            and all(q < 0.0 for q in halves)
            and all(b < a for a, b in zip(halves, halves[1:]))
            and all(b < a for a, b in zip(errors, errors[1:]))
        )
        shown = ", ".join(f"{q:.6f}" for q in halves)
        gaps = ", ".join(f"{err:.1e}" for err in errors)
        return passed, (
            f"lambda_min = {value:.4f}, Q/2 = [{shown}] -> {limit:.6f}, "
            f"errors [{gaps}]"
        )

    def stable_regime(self) -> tuple[bool, str]:
        wall = self.walls["even"]
        l0 = self._l0_eigenvalue("even")
        l2 = smallest_eigenpair(
            assemble_operator(OperatorKind.L2, wall.profile)
        ).smallest_eigenvalue
        oddness = verify_solution(self.weights["even"], wall).oddness_defect or 0.0
        passed = l0 >= -1e-6 and l2 >= -1e-6 and oddness <= 1e-10
        return passed, f"L0 {l0:.2e}, L2 {l2:.2e}, oddness {oddness:.1e}"

    def cross_solver(self) -> tuple[bool, str]:
        distances = {
            name: profile_distance(
                self.walls[name].profile,
                solve_convex(w, self.grids[name]).profile,
            )
            for name, w in self.weights.items()
        }
        worst = max(distances.values())
        shown = ", ".join(f"{k} {v:.1e}" for k, v in distances.items())
        return worst <= 1e-6, shown

    def hardy_identity(self) -> tuple[bool, str]:
        worst = 0.0
        for name in self.weights:
            profile = self.walls[name].profile
            flux = compute_flux(profile).nodal()
            pairs = (
                (assemble_operator(OperatorKind.L0, profile), flux),
                (assemble_operator(OperatorKind.L2, profile), np.cos(profile.values)),
            )
            for k in range(20):
                op, psi = pairs[k % 2]
                eta = self._rng.normal(size=profile.grid.node_count)
                split = hardy_split(op, psi, eta)
                scale = max(
                    1.0,
                    abs(split.total),
                    abs(split.potential_part),
                    abs(split.gradient_part),
                )
                worst = max(worst, split.residual / scale)
        return worst <= 1e-12, f"max relative residual {worst:.1e}"

    def first_integrals(self) -> tuple[bool, str]:
        d = self.step_form.d
        report = first_integral(self.walls["step"].profile)
        inner = report.interval(0.0, 1.0)
        outer = report.interval(1.0, DEFAULT_HALF_LENGTH)
        coarse = first_integral(
            solve_newton(
                step_weight(),
                build_grid(step_weight(), DEFAULT_HALF_LENGTH, self._coarse_cells),
            ).profile
        )
        orders = [
            math.log2(
                coarse.interval(lo, hi).max_deviation
                / max(report.interval(lo, hi).max_deviation, 1e-300)
            )
            for lo, hi in ((0.0, 1.0), (1.0, DEFAULT_HALF_LENGTH))
        ]
        passed = (
            abs(inner.mean - (d * d - 1.0)) <= 1e-3
            and abs(outer.mean) <= 1e-3
            and min(orders) >= 1.5
        )
        return passed, (
            f"(0,1) mean {inner.mean:.6f} vs {d * d - 1.0:.6f}, "
            f"(1,L) mean {outer.mean:.1e}, deviation orders "
            + ", ".join(f"{o:.2f}" for o in orders)
        )

    def flux_laws(self) -> tuple[bool, str]:
        flux = compute_flux(self.walls["step"].profile)
        monotone = flux_monotonicity(self.weights["step"], flux)
        positive = bool(np.all(flux.cell_flux > 0.0))
        jump = flux.max_jump()
        passed = positive and monotone.flux_nonincreasing and jump <= 1e-3
        return passed, (
            f"min flux {np.min(flux.cell_flux):.2e}, "
            f"max rise {monotone.max_flux_increase:.1e}, jump {jump:.1e}"
        )

    def nonexistence_sweep(self) -> tuple[bool, str]:
        x0_values = [float(k) for k in range(1, 13)]
        energies = [translated_wall_energy(x0) for x0 in x0_values]
        gaps = [
            abs(translated_wall_energy_quadrature(x0) - e)
            for x0, e in zip(x0_values, energies)
        ]
        passed = (
            all(b < a for a, b in zip(energies, energies[1:]))
            and all(e > 4.0 for e in energies)
            and energies[-1] - 4.0 <= 2e-3
            and max(gaps) <= 1e-6
        )
        return passed, (
            f"G(12) - 4 = {energies[-1] - 4.0:.1e}, quadrature gap {max(gaps):.1e}"
        )

    def gradient_correctness(self) -> tuple[bool, str]:
        step = 1e-6
        worst = 0.0
        for name in self.weights:
            grid = self.grids[name]
            base = self.walls[name].profile.values
            for _ in range(10):
                values = base + 0.05 * self._smooth_field(grid, pinned=True)
                profile = Profile(grid=grid, values=values)
                direction = self._rng.normal(size=grid.node_count)
                direction[~grid.free_mask] = 0.0
                analytic = float(gradient_G(profile) @ direction)
                numeric = (
                    planar_energy(grid, values + step * direction)
                    - planar_energy(grid, values - step * direction)
                ) / (2.0 * step)
                worst = max(worst, abs(numeric - analytic) / max(abs(analytic), 1e-12))
        return worst <= 1e-6, f"max relative error {worst:.1e}"

    def second_variation(self) -> tuple[bool, str]:
        profile = self.walls["step"].profile
        grid = profile.grid
        sphere = planar_map(profile)
        l2 = assemble_operator(OperatorKind.L2, profile)
        worst_gap = 0.0
        worst_normal = math.inf
        for _ in range(10):
            eta = self._smooth_field(grid, pinned=False)
            variation = second_variation_T(sphere, planar_variation(profile, eta))
            q_value = variation.q_value if variation.q_value is not None else math.nan
            worst_gap = max(
                worst_gap, abs(variation.total - q_value) / max(1.0, abs(q_value))
            )
            v3 = self._smooth_field(grid, pinned=False)
            normal = np.zeros((grid.node_count, 3))
            normal[:, 2] = v3
            normal[[0, -1]] = 0.0
            t_value = second_variation_T(sphere, normal).total
            if abs(t_value - l2.pairing(v3)) > 1e-10 * max(1.0, abs(t_value)):
                worst_normal = -math.inf
            worst_normal = min(worst_normal, t_value)
        passed = worst_gap <= 1e-10 and worst_normal >= -1e-10
        return passed, f"|T - Q| rel {worst_gap:.1e}, min T(0,0,v3) {worst_normal:.2e}"

    def mesh_convergence(self) -> tuple[bool, str]:
        levels = list(MESH_LEVELS)
        energies = [
            energy_G(
                solve_newton(
                    step_weight(), build_grid(step_weight(), DEFAULT_HALF_LENGTH, c)
                ).profile
            )
            for c in levels
        ]
        first, second = energies[0] - energies[1], energies[1] - energies[2]
        order = math.log2(abs(first / second)) if second != 0.0 else math.inf
        passed = order >= 1.9 and first * second > 0.0
        return passed, f"cells/unit {levels}: observed order {order:.2f}"


def verify_all(
    cells_per_unit: int = 200, mutation: Mutation | None = None
) -> list[CriterionResult]:
    """Run every acceptance criterion and return the records in order."""
    return AcceptanceSuite(cells_per_unit, mutation).run()
