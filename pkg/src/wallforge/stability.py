"""Second variation of the wall: Sturm-Liouville operators, spectra, witnesses.

Operators act on nodal vectors. Each is stored by its cell conductance
(already divided by the cell width) and its nodal potential, so that

    (A v, v) = Σ_c cond_c (v_{c+1} − v_c)² + Σ_i potential_i mass_i v_i²

with Dirichlet rows at ±L and, optionally, at the pinned center.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from wallforge.diagnostics import FluxField, compute_flux
from wallforge.energy import Profile, SphereMap, el_residual, energy_G, planar_map
from wallforge.errors import (
    DomainTooSmallError,
    EigenNoConvergenceError,
    NonPositivePsiError,
    NotTangentialError,
    ProfileNotConvergedError,
)
from wallforge.grid import Grid, build_grid
from wallforge.oracles import StepWallClosedForm
from wallforge.wall_solver import sample_wall
from wallforge.weight import BoolArray, FloatArray, step_weight

logger = logging.getLogger(__name__)

CONVERGED_RESIDUAL = 1e-8
EIGEN_RESIDUAL = 1e-8
TANGENT_TOLERANCE = 1e-10


class OperatorKind(StrEnum):
    L0 = "L0"
    L1 = "L1"
    L2 = "L2"


# ---------------------------------------------------------------------------
# Lagrange multiplier
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LagrangeMultiplier:
    """Nodal λ = a|∂m|² + a m₂², averaged onto nodes with the chord slope."""

    grid: Grid
    nodal_values: FloatArray

    @property
    def weighted(self) -> FloatArray:
        """λ_i mass_i, the form in which λ enters the pairings."""
        return self.nodal_values * self.grid.mass


def lagrange_multiplier(p: Profile) -> LagrangeMultiplier:
    """λ for the planar map of a profile."""
    return sphere_lagrange_multiplier(planar_map(p))


def sphere_lagrange_multiplier(m: SphereMap) -> LagrangeMultiplier:
    """λ_i mass_i = m_i · (K m)_i + α_i (m₂² + m₃²)_i for any sphere map.

    For unit vectors m_i · (m_i − m_j) = |m_i − m_j|² / 2, so the stiffness
    part is half the adjacent cell energies.
    """
    grid = m.grid
    half_cell = 0.5 * grid.conductance * np.sum(np.diff(m.values, axis=0) ** 2, axis=1)
    weighted = grid.node_weight * (m.m2**2 + m.m3**2)
    weighted[:-1] += half_cell
    weighted[1:] += half_cell
    return LagrangeMultiplier(grid=grid, nodal_values=weighted / grid.mass)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Symmetric tridiagonal form of L₀, L₁ or L₂ with lumped mass."""

    grid: Grid
    kind: OperatorKind
    conductance: FloatArray
    potential: FloatArray
    pinned_center: bool = False

    @property
    def mass(self) -> FloatArray:
        return self.grid.mass

    @cached_property
    def fixed(self) -> BoolArray:
        """Dirichlet nodes."""
        fixed = self.grid.boundary_mask.copy()
        if self.pinned_center:
            fixed[self.grid.zero_index] = True
        return fixed

    @cached_property
    def diag(self) -> FloatArray:
        diag = self.potential * self.mass
        diag[1:] += self.conductance
        diag[:-1] += self.conductance
        return diag

    @property
    def offdiag(self) -> FloatArray:
        return -self.conductance

    def restrict(self, v: FloatArray) -> FloatArray:
        """Zero the Dirichlet components."""
        return np.where(self.fixed, 0.0, np.asarray(v, dtype=float))

    def matvec(self, v: FloatArray) -> FloatArray:
        """A v with Dirichlet rows zeroed (v is restricted first)."""
        v = self.restrict(v)
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return self.restrict(out)

    def apply(self, v: FloatArray) -> FloatArray:
        """L v = M⁻¹ A v, the operator in strong form."""
        return self.matvec(v) / self.mass

    def pairing(self, u: FloatArray, v: FloatArray | None = None) -> float:
        """(A u, v) in summation-by-parts form, both restricted."""
        u = self.restrict(u)
        v = u if v is None else self.restrict(v)
        kinetic = np.sum(self.conductance * np.diff(u) * np.diff(v))
        return float(kinetic + np.sum(self.potential * self.mass * u * v))


def _operator(
    kind: OperatorKind,
    p: Profile,
    *,
    pin_center: bool,
    flip_potential: bool,
) -> TridiagonalOperator:
    grid = p.grid
    phi = p.values
    if kind is OperatorKind.L0:
        conductance = grid.conductance * np.cos(np.diff(phi))
        potential = -(grid.node_weight / grid.mass) * np.cos(2.0 * phi)
    else:
        conductance = grid.conductance.copy()
        potential = -lagrange_multiplier(p).nodal_values
        if kind is OperatorKind.L2:
            potential = potential + grid.node_weight / grid.mass
    if flip_potential:
        potential = -potential
    return TridiagonalOperator(
        grid=grid,
        kind=kind,
        conductance=conductance,
        potential=potential,
        pinned_center=pin_center,
    )


def assemble_operator(
    kind: OperatorKind,
    p: Profile,
    *,
    pin_center: bool = False,
    residual_tolerance: float = CONVERGED_RESIDUAL,
    flip_potential: bool = False,
) -> TridiagonalOperator:
    """Assemble L₀ (half the Hessian of G), L₁ or L₂ at a converged profile.

    ``flip_potential`` negates the potential; it exists for mutation testing.

    Raises:
        ProfileNotConvergedError: If the Euler-Lagrange residual of *p*
            exceeds ``residual_tolerance``.
    """
    residual = el_residual(p)
    if residual > residual_tolerance:
        msg = f"Profile residual {residual:.3e} exceeds {residual_tolerance:.1e}"
        raise ProfileNotConvergedError(msg)
    return _operator(kind, p, pin_center=pin_center, flip_potential=flip_potential)


def quadratic_form_q(p: Profile, eta: FloatArray) -> float:
    """Q(η) = Σ (a/h) cos Δφ (Δη)² − Σ α cos 2φ η², η zeroed at ±L."""
    grid = p.grid
    eta = np.asarray(eta, dtype=float).copy()
    eta[[0, -1]] = 0.0
    phi = p.values
    kinetic = np.sum(grid.conductance * np.cos(np.diff(phi)) * np.diff(eta) ** 2)
    return float(kinetic - np.sum(grid.node_weight * np.cos(2.0 * phi) * eta**2))


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StabilityReport:
    kind: OperatorKind
    smallest_eigenvalue: float
    eigenvector: FloatArray
    converged: bool
    residual: float

    @property
    def stable(self) -> bool:
        return self.smallest_eigenvalue >= 0.0


def smallest_eigenpair(op: TridiagonalOperator) -> StabilityReport:
    """Smallest eigenvalue of A v = λ M v on the free nodes.

    Symmetrizes with M^{-1/2}, then runs LAPACK bisection on Sturm counts
    (stebz) with inverse iteration (stein) for the vector.

    Raises:
        EigenNoConvergenceError: If LAPACK fails or the residual
            ‖A v − λ M v‖ exceeds 1e-8 ‖v‖.
    """
    free = np.flatnonzero(~op.fixed)
    scale = 1.0 / np.sqrt(op.mass[free])
    diag = op.diag[free] * scale**2
    adjacent = free[1:] == free[:-1] + 1
    offdiag = np.where(adjacent, op.offdiag[free[:-1]], 0.0) * scale[:-1] * scale[1:]
    try:
        values, vectors = eigh_tridiagonal(
            diag, offdiag, select="i", select_range=(0, 0)
        )
    except (LinAlgError, ValueError) as exc:
        msg = f"Tridiagonal eigensolver failed for {op.kind}: {exc}"
        raise EigenNoConvergenceError(msg) from exc

    eigenvalue = float(values[0])
    vector = np.zeros(op.grid.node_count)
    vector[free] = vectors[:, 0] * scale
    if np.sum(op.mass * vector) < 0.0:
        vector = -vector
    residual = float(
        np.linalg.norm(op.matvec(vector) - eigenvalue * op.mass * vector)
    )
    norm = float(np.linalg.norm(vector))
    if not (math.isfinite(residual) and residual <= EIGEN_RESIDUAL * norm):
        msg = (
            f"{op.kind} eigenpair residual {residual:.3e} "
            f"above {EIGEN_RESIDUAL} * {norm:.3e}"
        )
        raise EigenNoConvergenceError(msg)
    logger.debug(
        "%s smallest eigenvalue %.6e (residual %.2e)", op.kind, eigenvalue, residual
    )
    return StabilityReport(
        kind=op.kind,
        smallest_eigenvalue=eigenvalue,
        eigenvector=vector,
        converged=True,
        residual=residual,
    )


# ---------------------------------------------------------------------------
# Hardy decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HardySplit:
    """(A η, η) = (A ψ, ψ η̂²) + Σ cond ψ_c² (Δη̂)², plus its rounding residual."""

    total: float
    potential_part: float
    gradient_part: float

    @property
    def residual(self) -> float:
        return abs(self.total - self.potential_part - self.gradient_part)


def hardy_split(
    op: TridiagonalOperator, psi: FloatArray, eta: FloatArray
) -> HardySplit:
    """Split (A η, η) through a ground state ψ.

    Both ψ and η are restricted to the free nodes. On each run of free nodes
    between Dirichlet nodes ψ must keep one strict sign; negative runs are
    flipped, so sin φ works for L₁ with the center pinned. η̂ = η/ψ is zero on
    Dirichlet nodes and the cell value of ψ² is ψ_c ψ_{c+1}.

    Raises:
        NonPositivePsiError: If ψ vanishes or changes sign inside a run.
    """
    free = ~op.fixed
    psi = _oriented(op, op.restrict(psi))
    eta = op.restrict(eta)
    ratio = np.zeros_like(eta)
    ratio[free] = eta[free] / psi[free]
    gradient_part = float(
        np.sum(op.conductance * psi[:-1] * psi[1:] * np.diff(ratio) ** 2)
    )
    return HardySplit(
        total=op.pairing(eta),
        potential_part=op.pairing(psi, psi * ratio**2),
        gradient_part=gradient_part,
    )


def _oriented(op: TridiagonalOperator, psi: FloatArray) -> FloatArray:
    """Flip ψ to be positive on every run of free nodes."""
    runs = np.split(np.arange(psi.size), np.flatnonzero(op.fixed))
    oriented = psi.copy()
    for run in runs:
        inner = run[~op.fixed[run]]
        if inner.size == 0:
            continue
        values = psi[inner]
        if np.all(values < 0.0):
            oriented[inner] = -values
        elif not np.all(values > 0.0):
            worst = int(inner[np.argmin(np.abs(values))])
            msg = (
                "psi must keep a strict sign between Dirichlet nodes, "
                f"got {psi[worst]:.3e} at node {worst}"
            )
            raise NonPositivePsiError(msg)
    return oriented


def hardy_residual(op: TridiagonalOperator, psi: FloatArray, eta: FloatArray) -> float:
    """|(A η, η) − (A ψ, ψ η̂²) − Σ cond ψ_c² (Δη̂)²|, zero up to rounding."""
    return hardy_split(op, psi, eta).residual


# ---------------------------------------------------------------------------
# Instability witnesses
# ---------------------------------------------------------------------------


def smoothstep_cutoff(s: FloatArray) -> FloatArray:
    """ψ(s) = 1 − 3s² + 2s³ on [0, 1], 1 below, 0 above."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return 1.0 - 3.0 * s**2 + 2.0 * s**3


@dataclass(frozen=True, eq=False)
class Witness:
    epsilon: float
    eta: FloatArray
    q_value: float


def cutoff_witness(
    epsilon: float, p: Profile, flux: FluxField | None = None
) -> Witness:
    """η_ε = ξ η̂_ε with η̂_ε = 1 on (-1, 1) and ψ(ε(|x| − 1)) beyond.

    Raises:
        DomainTooSmallError: If L ≤ 1 + 2/ε.
    """
    grid = p.grid
    needed = 1.0 + 2.0 / epsilon
    if not grid.half_length > needed:
        msg = (
            f"Witness with epsilon={epsilon} needs half_length > {needed}, "
            f"got {grid.half_length}"
        )
        raise DomainTooSmallError(msg)
    xi = (compute_flux(p) if flux is None else flux).nodal()
    cutoff = smoothstep_cutoff(epsilon * (np.abs(grid.nodes) - 1.0))
    eta = xi * cutoff
    eta[[0, -1]] = 0.0
    q_value = quadratic_form_q(p, eta)
    logger.debug("Witness epsilon=%g: Q=%.10f", epsilon, q_value)
    return Witness(epsilon=epsilon, eta=eta, q_value=q_value)


def instability_witness_step(
    epsilon: float, step: StepWallClosedForm, g: Grid
) -> Witness:
    """Cutoff witness built on the sampled closed-form step wall."""
    profile = sample_wall(g, step.phi).profile
    return cutoff_witness(epsilon, profile)


@dataclass(frozen=True)
class WitnessEstimate:
    """Q(η_ε) on a grid and on its halving.

    The discrete Q has an O(h) bias that does not shrink with ε, so the
    ε → 0 limit is compared against ``extrapolated`` = 2 Q(h/2) − Q(h).
    """

    epsilon: float
    coarse: float
    fine: float

    @property
    def extrapolated(self) -> float:
        return 2.0 * self.fine - self.coarse


def extrapolated_step_witnesses(
    epsilons: Sequence[float],
    step: StepWallClosedForm,
    half_length: float,
    cells_per_unit: int,
) -> list[WitnessEstimate]:
    """Step-weight witnesses at *cells_per_unit* and at twice that resolution.

    Args:
        epsilons: Cutoff rates, each with half_length > 1 + 2/ε.
        step: Closed-form step wall, sampled once per grid.
        half_length: Truncation L shared by both grids.
        cells_per_unit: Resolution of the coarser grid.

    Returns:
        One estimate per epsilon, in the order given.

    Raises:
        DomainTooSmallError: If some epsilon does not fit in half_length.
    """
    w = step_weight()
    levels: list[list[float]] = []
    for resolution in (cells_per_unit, 2 * cells_per_unit):
        profile = sample_wall(build_grid(w, half_length, resolution), step.phi).profile
        flux = compute_flux(profile)
        levels.append([cutoff_witness(eps, profile, flux).q_value for eps in epsilons])
    estimates = [
        WitnessEstimate(epsilon=eps, coarse=coarse, fine=fine)
        for eps, coarse, fine in zip(epsilons, *levels, strict=True)
    ]
    for e in estimates:
        logger.debug(
            "Witness epsilon=%g: Q(h)=%.10f Q(h/2)=%.10f extrapolated=%.10f",
            e.epsilon,
            e.coarse,
            e.fine,
            e.extrapolated,
        )
    return estimates


# ---------------------------------------------------------------------------
# Second variation on the sphere
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SecondVariation:
    """T(v) with its split into the in-plane part and the m₃ part."""

    total: float
    in_plane: float
    normal: float
    eta: FloatArray | None = None
    q_value: float | None = None


def _t_form(m: SphereMap, lam: LagrangeMultiplier, v: FloatArray) -> float:
    grid = m.grid
    kinetic = np.sum(grid.conductance * np.sum(np.diff(v, axis=0) ** 2, axis=1))
    potential = np.sum(grid.node_weight * (v[:, 1] ** 2 + v[:, 2] ** 2))
    constraint = np.sum(lam.weighted * np.sum(v**2, axis=1))
    return float(kinetic + potential - constraint)


def second_variation_T(m: SphereMap, v: FloatArray) -> SecondVariation:
    """T(v) = Σ (a/h)|Δv|² + Σ α (v₂² + v₃²) − Σ λ mass |v|².

    For a planar map and v₃ ≡ 0 the in-plane part is reported again as
    Q(η) with η = v₁ m₂ − v₂ m₁.

    Raises:
        NotTangentialError: If v · m exceeds 1e-10 at some node.
        ValueError: If v does not vanish at ±L.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != m.values.shape:
        msg = f"Variation needs shape {m.values.shape}, got {v.shape}"
        raise ValueError(msg)
    normal_defect = float(np.max(np.abs(np.sum(v * m.values, axis=1))))
    if normal_defect > TANGENT_TOLERANCE:
        msg = f"Variation is not tangent to the map: |v . m| = {normal_defect:.3e}"
        raise NotTangentialError(msg)
    if np.any(v[[0, -1]] != 0.0):
        msg = "Variation must vanish at both ends"
        raise ValueError(msg)

    lam = sphere_lagrange_multiplier(m)
    in_plane_v = v.copy()
    in_plane_v[:, 2] = 0.0
    normal_v = np.zeros_like(v)
    normal_v[:, 2] = v[:, 2]
    in_plane = _t_form(m, lam, in_plane_v)
    normal = _t_form(m, lam, normal_v)

    eta: FloatArray | None = None
    q_value: float | None = None
    planar = np.all(m.m3 == 0.0) and np.all(m.m2 >= 0.0)
    if planar and np.all(v[:, 2] == 0.0):
        eta = v[:, 0] * m.m2 - v[:, 1] * m.m1
        phi = np.arctan2(m.m1, m.m2)
        grid = m.grid
        kinetic = np.sum(grid.conductance * np.cos(np.diff(phi)) * np.diff(eta) ** 2)
        q_value = float(
            kinetic - np.sum(grid.node_weight * np.cos(2.0 * phi) * eta**2)
        )
    return SecondVariation(
        total=_t_form(m, lam, v),
        in_plane=in_plane,
        normal=normal,
        eta=eta,
        q_value=q_value,
    )


def planar_variation(p: Profile, eta: FloatArray) -> FloatArray:
    """v = (η cos φ, −η sin φ, 0), zeroed at ±L."""
    eta = np.asarray(eta, dtype=float).copy()
    eta[[0, -1]] = 0.0
    phi = p.values
    return np.column_stack([eta * np.cos(phi), -eta * np.sin(phi), np.zeros_like(eta)])


# ---------------------------------------------------------------------------
# Energy gap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyGapSplit:
    """G(φ̃) − G(φ) = (L₁v₁, v₁) + (L₂v₂, v₂) with v = m̃ − m."""

    gap: float
    l1_part: float
    l2_part: float

    @property
    def residual(self) -> float:
        return abs(self.gap - self.l1_part - self.l2_part)


def energy_gap_split(p: Profile, other: Profile) -> EnergyGapSplit:
    """Split the energy excess of *other* over the critical point *p*.

    Exact when *p* solves the discrete Euler-Lagrange equation on every node
    where the two profiles differ.
    """
    if other.grid is not p.grid:
        msg = "Both profiles must live on the same grid"
        raise ValueError(msg)
    v = planar_map(other).values - planar_map(p).values
    l1 = _operator(OperatorKind.L1, p, pin_center=False, flip_potential=False)
    l2 = _operator(OperatorKind.L2, p, pin_center=False, flip_potential=False)
    return EnergyGapSplit(
        gap=energy_G(other) - energy_G(p),
        l1_part=l1.pairing(v[:, 0]),
        l2_part=l2.pairing(v[:, 1]),
    )
