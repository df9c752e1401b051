"""Tests for wallforge.wall_solver."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from wallforge.diagnostics import compute_flux
from wallforge.energy import energy_G
from wallforge.errors import NoConvergenceError
from wallforge.grid import Grid, build_grid
from wallforge.models import SolverOptions
from wallforge.oracles import StepWallClosedForm, homogeneous_wall
from wallforge.wall_solver import (
    SolvePath,
    SolveResult,
    profile_distance,
    sample_wall,
    solve_convex,
    solve_newton,
    verify_solution,
)
from wallforge.weight import Weight, homogeneous_weight, step_weight


class TestNewton:
    def test_homogeneous_matches_closed_form(self, unit_wall: SolveResult) -> None:
        grid = unit_wall.profile.grid
        exact = homogeneous_wall().phi(grid.nodes)
        assert np.max(np.abs(unit_wall.profile.values - exact)) <= 1e-3
        assert unit_wall.path is SolvePath.NEWTON

    def test_residual_below_tolerance(self, notched_wall: SolveResult) -> None:
        assert notched_wall.final_residual <= SolverOptions().residual_tolerance

    def test_profile_is_monotone_and_bounded(self, notched_wall: SolveResult) -> None:
        phi = notched_wall.profile.values
        assert np.all(np.diff(phi) >= 0.0)
        assert np.all(np.abs(phi) <= np.pi / 2)

    def test_even_weight_gives_odd_profile(self, even_wall: SolveResult) -> None:
        phi = even_wall.profile.values
        assert np.max(np.abs(phi + phi[::-1])) <= 1e-10

    def test_skew_weight(self, skew_weight: Weight) -> None:
        grid = build_grid(skew_weight, 10.0, 40)
        result = solve_newton(skew_weight, grid)
        report = verify_solution(skew_weight, result)
        assert report.passed
        assert report.oddness_defect is None

    def test_step_center_slope(
        self, notched_wall: SolveResult, step_form: StepWallClosedForm
    ) -> None:
        grid = notched_wall.profile.grid
        zero = grid.zero_index
        slope = notched_wall.profile.values[zero + 1] / grid.widths[zero]
        assert slope == pytest.approx(step_form.d, abs=1e-3)

    def test_energy_below_centered_homogeneous_wall(
        self, notched_wall: SolveResult
    ) -> None:
        # 4 + 4 tanh(1) is G of the a ≡ 1 wall under the step weight.
        assert 4.0 < energy_G(notched_wall.profile) < 4.0 + 4.0 * np.tanh(1.0)

    def test_iteration_cap(self, notched_weight: Weight, notched_grid: Grid) -> None:
        opts = SolverOptions(max_iterations=1)
        with pytest.raises(NoConvergenceError) as info:
            solve_newton(notched_weight, notched_grid, opts)
        assert info.value.iterations == 1
        assert info.value.residual > opts.residual_tolerance

    def test_grid_from_other_weight(self, unit_grid: Grid) -> None:
        with pytest.raises(ValueError, match="do not match"):
            solve_newton(step_weight(), unit_grid)

    def test_scale_invariance(self) -> None:
        """a ≡ c has the same wall as a ≡ 1, with c times the energy."""
        w = homogeneous_weight(3.0)
        grid = build_grid(w, 12.0, 50)
        result = solve_newton(w, grid)
        exact = homogeneous_wall().phi(grid.nodes)
        assert np.max(np.abs(result.profile.values - exact)) <= 2e-3
        assert energy_G(result.profile) == pytest.approx(12.0, abs=1e-2)


class TestConvex:
    @pytest.mark.timeout(60)
    @pytest.mark.parametrize("name", ["unit", "notched", "even"])
    def test_agrees_with_newton(
        self, name: str, request: pytest.FixtureRequest
    ) -> None:
        weight: Weight = request.getfixturevalue(f"{name}_weight")
        wall: SolveResult = request.getfixturevalue(f"{name}_wall")
        convex = solve_convex(weight, wall.profile.grid)
        assert convex.path is SolvePath.CONVEX
        assert profile_distance(wall.profile, convex.profile) <= 1e-6

    def test_iteration_cap(self, notched_weight: Weight, notched_grid: Grid) -> None:
        with pytest.raises(NoConvergenceError):
            solve_convex(notched_weight, notched_grid, SolverOptions(max_iterations=1))


class TestVerify:
    def test_converged_wall_passes(
        self, even_weight: Weight, even_wall: SolveResult
    ) -> None:
        report = verify_solution(even_weight, even_wall)
        assert report.passed
        assert report.monotone
        assert report.flux_positive
        assert report.odd_ok is True

    @pytest.mark.timeout(60)
    def test_even_weight_oddness_is_unforced(
        self, even_weight: Weight, even_grid: Grid
    ) -> None:
        for result in (
            solve_newton(even_weight, even_grid),
            solve_convex(even_weight, even_grid),
        ):
            report = verify_solution(even_weight, result)
            assert report.oddness_defect is not None
            assert report.oddness_defect <= 1e-10
            assert report.odd_ok is True

    def test_homogeneous_start_is_not_a_solution(
        self, notched_weight: Weight, notched_grid: Grid
    ) -> None:
        guess = sample_wall(notched_grid, homogeneous_wall().phi)
        report = verify_solution(notched_weight, guess)
        assert not report.el_residual_ok
        assert not report.passed

    def test_flux_is_positive(self, notched_wall: SolveResult) -> None:
        assert np.all(compute_flux(notched_wall.profile).cell_flux > 0.0)

    def test_profile_distance(self, unit_wall: SolveResult) -> None:
        assert profile_distance(unit_wall.profile, unit_wall.profile) == 0.0



def _logged_energies(caplog: pytest.LogCaptureFixture, prefix: str) -> list[float]:
    return [
        float(record.args[1])
        for record in caplog.records
        if record.name == "wallforge.wall_solver"
        and record.msg.startswith(prefix)
        and isinstance(record.args, tuple)
    ]


class TestEnergyDescent:
    def test_newton_energy_never_increases(
        self,
        notched_weight: Weight,
        notched_grid: Grid,
        caplog: pytest.LogCaptureFixture,
    ) -> None:
        with caplog.at_level(logging.DEBUG, logger="wallforge.wall_solver"):
            solve_newton(notched_weight, notched_grid)
        energies = _logged_energies(caplog, "newton")
        assert len(energies) >= 2
        assert all(b <= a for a, b in zip(energies, energies[1:]))

    @pytest.mark.timeout(60)
    def test_convex_energy_never_increases(
        self,
        notched_weight: Weight,
        notched_grid: Grid,
        caplog: pytest.LogCaptureFixture,
    ) -> None:
        with caplog.at_level(logging.DEBUG, logger="wallforge.wall_solver"):
            solve_convex(notched_weight, notched_grid)
        energies = _logged_energies(caplog, "convex")
        assert len(energies) >= 2
        assert all(b <= a for a, b in zip(energies, energies[1:]))


class TestSampleWall:
    def test_oracle_path(
        self, notched_grid: Grid, step_form: StepWallClosedForm
    ) -> None:
        result = sample_wall(notched_grid, step_form.phi)
        assert result.path is SolvePath.ORACLE
        assert result.iterations == 0
        assert result.profile.values[notched_grid.zero_index] == 0.0

    def test_sampled_closed_form_residual_scales_with_mesh(
        self, notched_grid: Grid, step_form: StepWallClosedForm
    ) -> None:
        result = sample_wall(notched_grid, step_form.phi)
        assert result.final_residual <= float(notched_grid.widths.max())
        coarse = sample_wall(
            build_grid(step_weight(), 12.0, 25), step_form.phi
        ).final_residual
        assert result.final_residual < coarse

    def test_sampled_matches_discrete_solve(
        self,
        notched_grid: Grid,
        step_form: StepWallClosedForm,
        notched_wall: SolveResult,
    ) -> None:
        sampled = sample_wall(notched_grid, step_form.phi).profile
        assert np.max(np.abs(sampled.values - notched_wall.profile.values)) <= 1e-3
