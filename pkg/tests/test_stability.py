"""Tests for wallforge.stability."""

from __future__ import annotations

import numpy as np
import pytest

from wallforge.diagnostics import compute_flux
from wallforge.energy import (
    Profile,
    energy_F,
    energy_G,
    planar_energy,
    planar_gradient,
    planar_map,
)
from wallforge.errors import (
    DomainTooSmallError,
    NonPositivePsiError,
    NotTangentialError,
    ProfileNotConvergedError,
)
from wallforge.grid import Grid, build_grid
from wallforge.oracles import StepWallClosedForm, homogeneous_wall
from wallforge.stability import (
    OperatorKind,
    assemble_operator,
    cutoff_witness,
    energy_gap_split,
    extrapolated_step_witnesses,
    hardy_residual,
    hardy_split,
    instability_witness_step,
    lagrange_multiplier,
    planar_variation,
    quadratic_form_q,
    second_variation_T,
    smallest_eigenpair,
    smoothstep_cutoff,
)
from wallforge.wall_solver import SolveResult, sample_wall
from wallforge.weight import step_weight


def _smooth(
    grid: Grid, rng: np.random.Generator, *, pinned: bool = False
) -> np.ndarray:
    """Random smooth field vanishing at ±L (and at 0 when pinned)."""
    x = grid.nodes / grid.half_length
    modes = np.arange(1, 6)
    field = np.sin(np.pi * np.outer(x + 1.0, modes) / 2.0) @ (
        rng.normal(size=modes.size) / modes
    )
    field *= 1.0 - x**2
    return field * x if pinned else field


class TestLagrangeMultiplier:
    def test_planar_formula(self, notched_wall: SolveResult) -> None:
        p = notched_wall.profile
        grid = p.grid
        cell = 2.0 * grid.conductance * np.sin(0.5 * np.diff(p.values)) ** 2
        expected = grid.node_weight * np.cos(p.values) ** 2
        expected[:-1] += cell
        expected[1:] += cell
        np.testing.assert_allclose(
            lagrange_multiplier(p).weighted, expected, rtol=1e-10, atol=1e-14
        )

    def test_keeps_digits_on_fine_grid(self) -> None:
        grid = build_grid(step_weight(), 12.0, 400)
        p = sample_wall(grid, homogeneous_wall().phi).profile
        cell = 2.0 * grid.conductance * np.sin(0.5 * np.diff(p.values)) ** 2
        expected = grid.node_weight * np.cos(p.values) ** 2
        expected[:-1] += cell
        expected[1:] += cell
        weighted = lagrange_multiplier(p).weighted
        # The snapped ends shift the outermost cells by ~1e-17 absolute.
        core = np.abs(grid.nodes) <= 6.0
        np.testing.assert_allclose(weighted[core], expected[core], rtol=1e-12)
        total = energy_F(planar_map(p))
        assert float(np.sum(weighted)) == pytest.approx(total, rel=1e-13)


class TestOperators:
    def test_l0_is_half_second_difference_of_G(
        self, notched_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = notched_wall.profile
        eta = _smooth(p.grid, rng)
        op = assemble_operator(OperatorKind.L0, p)
        t = 1e-4
        second = (
            planar_energy(p.grid, p.values + t * eta)
            + planar_energy(p.grid, p.values - t * eta)
            - 2.0 * energy_G(p)
        ) / (2.0 * t * t)
        assert op.pairing(eta) == pytest.approx(second, rel=1e-5, abs=1e-6)

    def test_l0_pairing_is_Q(
        self, notched_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = notched_wall.profile
        eta = _smooth(p.grid, rng)
        op = assemble_operator(OperatorKind.L0, p)
        assert op.pairing(eta) == pytest.approx(quadratic_form_q(p, eta), rel=1e-12)

    def test_l2_minus_l1_is_weight(
        self, notched_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = notched_wall.profile
        v = _smooth(p.grid, rng)
        l1 = assemble_operator(OperatorKind.L1, p)
        l2 = assemble_operator(OperatorKind.L2, p)
        expected = float(np.sum(p.grid.node_weight * v**2))
        assert l2.pairing(v) - l1.pairing(v) == pytest.approx(expected, rel=1e-12)

    def test_l2_annihilates_cosine(self, notched_wall: SolveResult) -> None:
        p = notched_wall.profile
        op = assemble_operator(OperatorKind.L2, p)
        expected = op.restrict(-np.sin(p.values) * planar_gradient(p.grid, p.values))
        np.testing.assert_allclose(
            op.matvec(np.cos(p.values)), 0.5 * expected, atol=1e-11
        )

    def test_pinned_center(self, notched_wall: SolveResult) -> None:
        p = notched_wall.profile
        op = assemble_operator(OperatorKind.L1, p, pin_center=True)
        assert op.fixed[p.grid.zero_index]
        assert op.fixed[0] and op.fixed[-1]
        v = np.ones(p.grid.node_count)
        assert op.matvec(v)[p.grid.zero_index] == 0.0

    def test_apply_divides_by_mass(
        self, unit_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = unit_wall.profile
        op = assemble_operator(OperatorKind.L0, p)
        v = _smooth(p.grid, rng)
        np.testing.assert_allclose(op.apply(v) * op.mass, op.matvec(v))

    def test_rejects_unconverged_profile(self, notched_grid: Grid) -> None:
        guess = sample_wall(notched_grid, homogeneous_wall().phi).profile
        with pytest.raises(ProfileNotConvergedError):
            assemble_operator(OperatorKind.L0, guess)

    def test_flip_potential(self, unit_wall: SolveResult) -> None:
        p = unit_wall.profile
        op = assemble_operator(OperatorKind.L0, p)
        flipped = assemble_operator(OperatorKind.L0, p, flip_potential=True)
        np.testing.assert_array_equal(flipped.potential, -op.potential)


class TestSpectrum:
    def test_homogeneous_zero_mode(self, unit_wall: SolveResult) -> None:
        p = unit_wall.profile
        report = smallest_eigenpair(assemble_operator(OperatorKind.L0, p))
        assert abs(report.smallest_eigenvalue) <= 1e-4
        flux = compute_flux(p).nodal()
        vector = report.eigenvector
        cosine = abs(vector @ flux) / (np.linalg.norm(vector) * np.linalg.norm(flux))
        assert cosine >= 0.999

    def test_step_weight_is_unstable(self, notched_wall: SolveResult) -> None:
        report = smallest_eigenpair(
            assemble_operator(OperatorKind.L0, notched_wall.profile)
        )
        assert report.converged
        assert report.smallest_eigenvalue < 0.0
        assert not report.stable

    def test_even_nondecreasing_weight_is_stable(self, even_wall: SolveResult) -> None:
        p = even_wall.profile
        for kind, pinned in (
            (OperatorKind.L0, False),
            (OperatorKind.L1, True),
            (OperatorKind.L2, False),
        ):
            op = assemble_operator(kind, p, pin_center=pinned)
            assert smallest_eigenpair(op).smallest_eigenvalue >= -1e-6, kind

    def test_l2_ground_state_is_cosine(self, notched_wall: SolveResult) -> None:
        p = notched_wall.profile
        report = smallest_eigenpair(assemble_operator(OperatorKind.L2, p))
        assert abs(report.smallest_eigenvalue) <= 1e-8
        cos_phi = np.cos(p.values)
        vector = report.eigenvector
        cosine = vector @ cos_phi / (np.linalg.norm(vector) * np.linalg.norm(cos_phi))
        assert cosine >= 0.999

    def test_eigenvector_vanishes_on_dirichlet_nodes(
        self, notched_wall: SolveResult
    ) -> None:
        op = assemble_operator(OperatorKind.L1, notched_wall.profile, pin_center=True)
        report = smallest_eigenpair(op)
        assert np.all(report.eigenvector[op.fixed] == 0.0)
        assert report.residual <= 1e-8 * np.linalg.norm(report.eigenvector)


class TestHardy:
    def test_l0_with_flux(
        self, notched_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = notched_wall.profile
        op = assemble_operator(OperatorKind.L0, p)
        psi = compute_flux(p).nodal()
        for _ in range(5):
            eta = rng.normal(size=p.grid.node_count)
            split = hardy_split(op, psi, eta)
            scale = max(1.0, abs(split.potential_part), abs(split.gradient_part))
            assert split.residual <= 1e-12 * scale
            assert split.gradient_part >= 0.0

    def test_l2_with_cosine(
        self, even_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = even_wall.profile
        op = assemble_operator(OperatorKind.L2, p)
        eta = rng.normal(size=p.grid.node_count)
        split = hardy_split(op, np.cos(p.values), eta)
        scale = max(1.0, abs(split.total), abs(split.gradient_part))
        assert split.residual <= 1e-12 * scale
        # L₂ cos φ vanishes at a critical point, leaving only the gradient part.
        assert abs(split.potential_part) <= 1e-6 * scale

    def test_l1_with_sine_on_half_lines(
        self, even_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = even_wall.profile
        op = assemble_operator(OperatorKind.L1, p, pin_center=True)
        eta = rng.normal(size=p.grid.node_count)
        split = hardy_split(op, np.sin(p.values), eta)
        scale = max(
            1.0, abs(split.total), abs(split.potential_part), abs(split.gradient_part)
        )
        assert split.residual <= 1e-12 * scale
        assert hardy_residual(op, np.sin(p.values), eta) == split.residual

    def test_sign_change_rejected(self, unit_wall: SolveResult) -> None:
        p = unit_wall.profile
        op = assemble_operator(OperatorKind.L0, p)
        with pytest.raises(NonPositivePsiError):
            hardy_split(op, p.values, np.ones(p.grid.node_count))


class TestWitness:
    def test_smoothstep(self) -> None:
        s = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
        np.testing.assert_allclose(smoothstep_cutoff(s), [1.0, 1.0, 0.5, 0.0, 0.0])

    def test_domain_too_small(self, notched_wall: SolveResult) -> None:
        with pytest.raises(DomainTooSmallError):
            cutoff_witness(0.1, notched_wall.profile)

    def test_discrete_wall_witness_is_negative(self, notched_wall: SolveResult) -> None:
        witness = cutoff_witness(0.2, notched_wall.profile)
        assert witness.q_value < 0.0
        assert witness.eta[0] == witness.eta[-1] == 0.0

    def test_step_witness_is_negative(self, step_form: StepWallClosedForm) -> None:
        grid = build_grid(step_weight(), 45.0, 50)
        assert instability_witness_step(0.05, step_form, grid).q_value < 0.0

    @pytest.mark.timeout(60)
    def test_step_witnesses_converge(self, step_form: StepWallClosedForm) -> None:
        estimates = extrapolated_step_witnesses((0.2, 0.1, 0.05), step_form, 45.0, 100)
        halves = [0.5 * e.extrapolated for e in estimates]
        limit = step_form.instability_limit()
        errors = [abs(q - limit) for q in halves]
        assert all(q < 0.0 for q in halves)
        assert halves[0] > halves[1] > halves[2]
        assert errors[0] > errors[1] > errors[2]

    @pytest.mark.timeout(60)
    def test_extrapolation_removes_mesh_bias(
        self, step_form: StepWallClosedForm
    ) -> None:
        (estimate,) = extrapolated_step_witnesses((0.05,), step_form, 45.0, 100)
        limit = step_form.instability_limit()
        raw = abs(0.5 * estimate.fine - limit)
        assert abs(0.5 * estimate.extrapolated - limit) < 0.25 * raw

    def test_coarse_level_matches_single_witness(
        self, step_form: StepWallClosedForm
    ) -> None:
        (estimate,) = extrapolated_step_witnesses((0.2,), step_form, 12.0, 50)
        grid = build_grid(step_weight(), 12.0, 50)
        single = instability_witness_step(0.2, step_form, grid)
        assert estimate.coarse == pytest.approx(single.q_value, rel=1e-12)

    def test_extrapolated_domain_too_small(
        self, step_form: StepWallClosedForm
    ) -> None:
        with pytest.raises(DomainTooSmallError):
            extrapolated_step_witnesses((0.1,), step_form, 12.0, 20)


class TestSecondVariation:
    def test_T_equals_Q_for_planar_variations(
        self, notched_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = notched_wall.profile
        eta = _smooth(p.grid, rng)
        result = second_variation_T(planar_map(p), planar_variation(p, eta))
        assert result.q_value is not None
        assert result.total == pytest.approx(result.q_value, rel=1e-10, abs=1e-10)
        assert result.normal == 0.0

    def test_normal_part_is_l2(
        self, notched_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = notched_wall.profile
        v3 = _smooth(p.grid, rng)
        v = np.zeros((p.grid.node_count, 3))
        v[:, 2] = v3
        result = second_variation_T(planar_map(p), v)
        l2 = assemble_operator(OperatorKind.L2, p)
        assert result.total == pytest.approx(l2.pairing(v3), rel=1e-10)
        assert result.total >= -1e-10
        assert result.q_value is None

    def test_parts_add_up(
        self, notched_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = notched_wall.profile
        v = planar_variation(p, _smooth(p.grid, rng))
        v[:, 2] = _smooth(p.grid, rng)
        result = second_variation_T(planar_map(p), v)
        assert result.total == pytest.approx(result.in_plane + result.normal)

    def test_rejects_non_tangential(self, unit_wall: SolveResult) -> None:
        m = planar_map(unit_wall.profile)
        v = m.values.copy()
        v[[0, -1]] = 0.0
        with pytest.raises(NotTangentialError):
            second_variation_T(m, v)

    def test_rejects_nonzero_ends(self, unit_wall: SolveResult) -> None:
        p = unit_wall.profile
        phi = p.values
        v = np.column_stack([np.cos(phi), -np.sin(phi), np.zeros_like(phi)])
        with pytest.raises(ValueError, match="vanish"):
            second_variation_T(planar_map(p), v)


class TestEnergyGap:
    def test_split_is_exact_at_critical_point(
        self, even_wall: SolveResult, rng: np.random.Generator
    ) -> None:
        p = even_wall.profile
        other = Profile(
            grid=p.grid, values=p.values + 0.1 * _smooth(p.grid, rng, pinned=True)
        )
        split = energy_gap_split(p, other)
        assert split.residual <= 1e-7
        assert split.gap > 0.0

    def test_requires_same_grid(self, notched_wall: SolveResult) -> None:
        other = sample_wall(
            build_grid(step_weight(), 12.0, 20), homogeneous_wall().phi
        ).profile
        with pytest.raises(ValueError, match="same grid"):
            energy_gap_split(notched_wall.profile, other)
