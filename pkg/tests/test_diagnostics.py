"""Tests for wallforge.diagnostics."""

from __future__ import annotations

import numpy as np
import pytest

from wallforge.diagnostics import compute_flux, first_integral, flux_monotonicity
from wallforge.grid import Grid, build_grid
from wallforge.oracles import StepWallClosedForm, homogeneous_wall
from wallforge.wall_solver import SolveResult, sample_wall, solve_newton
from wallforge.weight import Weight


class TestFlux:
    def test_positive(self, notched_wall: SolveResult) -> None:
        flux = compute_flux(notched_wall.profile)
        assert np.all(flux.cell_flux > 0.0)

    def test_continuous_across_breakpoints(self, notched_wall: SolveResult) -> None:
        flux = compute_flux(notched_wall.profile)
        assert [j.x for j in flux.jumps] == [-1.0, 1.0]
        assert flux.max_jump() <= 1e-3

    def test_raw_jump_is_first_order(self, notched_wall: SolveResult) -> None:
        flux = compute_flux(notched_wall.profile)
        for jump in flux.jumps:
            assert jump.raw_jump <= 2e-2

    def test_center_flux_is_twice_the_slope(
        self, notched_wall: SolveResult, step_form: StepWallClosedForm
    ) -> None:
        flux = compute_flux(notched_wall.profile)
        assert flux.at_center() / 2.0 == pytest.approx(step_form.d, abs=1e-3)

    def test_no_jumps_for_homogeneous(self, unit_wall: SolveResult) -> None:
        flux = compute_flux(unit_wall.profile)
        assert flux.jumps == ()
        assert flux.max_jump() == 0.0

    def test_nodal_shape(self, unit_wall: SolveResult) -> None:
        nodal = compute_flux(unit_wall.profile).nodal()
        assert nodal.shape == unit_wall.profile.values.shape

    def test_homogeneous_flux_is_sech(self, unit_wall: SolveResult) -> None:
        grid = unit_wall.profile.grid
        flux = compute_flux(unit_wall.profile)
        exact = homogeneous_wall().slope(grid.midpoints)
        assert np.max(np.abs(flux.cell_flux - exact)) <= 1e-3


class TestMonotonicity:
    def test_step_weight(
        self, notched_weight: Weight, notched_wall: SolveResult
    ) -> None:
        report = flux_monotonicity(notched_weight, compute_flux(notched_wall.profile))
        assert report.flux_nonincreasing
        # a decreases at x = 1, so the slope check does not apply.
        assert report.slope_nonincreasing is None
        assert report.passed

    def test_nondecreasing_weight_checks_slope(
        self, even_weight: Weight, even_wall: SolveResult
    ) -> None:
        report = flux_monotonicity(even_weight, compute_flux(even_wall.profile))
        assert report.flux_nonincreasing
        assert report.slope_nonincreasing is True
        assert report.max_slope_increase is not None
        assert report.max_slope_increase <= 1e-8

    def test_detects_increase(self, unit_weight: Weight, unit_grid: Grid) -> None:
        # A wall centered off zero, clipped to the pinned center, has a rising flux.
        sampled = sample_wall(unit_grid, homogeneous_wall(3.0).phi)
        report = flux_monotonicity(unit_weight, compute_flux(sampled.profile))
        assert not report.flux_nonincreasing
        assert report.max_flux_increase > 1e-3
        assert not report.passed


class TestFirstIntegral:
    def test_step_weight_constants(
        self, notched_wall: SolveResult, step_form: StepWallClosedForm
    ) -> None:
        report = first_integral(notched_wall.profile)
        inner = report.interval(0.0, 1.0)
        outer = report.interval(1.0, 12.0)
        assert inner.weight == 2.0
        assert outer.weight == 1.0
        assert inner.mean == pytest.approx(step_form.inner_constant, abs=1e-3)
        assert outer.mean == pytest.approx(0.0, abs=1e-3)

    def test_intervals_split_at_center_and_breakpoints(
        self, notched_wall: SolveResult
    ) -> None:
        report = first_integral(notched_wall.profile)
        edges = [(item.left, item.right) for item in report.per_interval]
        assert edges == [(-12.0, -1.0), (-1.0, 0.0), (0.0, 1.0), (1.0, 12.0)]

    def test_deviation_is_second_order(
        self, notched_weight: Weight, notched_wall: SolveResult
    ) -> None:
        coarse = solve_newton(notched_weight, build_grid(notched_weight, 12.0, 50))
        fine = first_integral(notched_wall.profile).interval(0.0, 1.0)
        rough = first_integral(coarse.profile).interval(0.0, 1.0)
        assert rough.max_deviation / fine.max_deviation > 2.8

    def test_homogeneous_integral_vanishes(self, unit_wall: SolveResult) -> None:
        report = first_integral(unit_wall.profile)
        assert len(report.per_interval) == 2
        for item in report.per_interval:
            assert abs(item.mean) <= 1e-4

    def test_nodal_shape(self, unit_wall: SolveResult) -> None:
        report = first_integral(unit_wall.profile)
        assert report.nodal().shape == unit_wall.profile.values.shape
