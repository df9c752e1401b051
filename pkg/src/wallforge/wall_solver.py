"""Discrete wall solvers: damped Newton on G and projected Newton on E."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from wallforge.diagnostics import compute_flux
from wallforge.energy import (
    HALF_PI,
    Profile,
    el_residual,
    energy_E_convex,
    gradient_E,
    hessian_E_bands,
    planar_energy,
    planar_gradient,
    planar_hessian_bands,
)
from wallforge.errors import MonotonicityViolationError, NoConvergenceError
from wallforge.grid import Grid, grid_matches_weight
from wallforge.models import SolverOptions, VerificationReport
from wallforge.oracles import homogeneous_wall
from wallforge.weight import BoolArray, FloatArray, Weight, classify_weight

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
MIN_STEP = 1e-12


class SolvePath(StrEnum):
    """Which route produced a profile."""

    NEWTON = "newton"
    CONVEX = "convex"
    ORACLE = "oracle"


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Converged profile together with how it was obtained."""

    profile: Profile
    iterations: int
    final_residual: float
    path: SolvePath


# ---------------------------------------------------------------------------
# Public solvers
# ---------------------------------------------------------------------------


def solve_newton(w: Weight, g: Grid, opts: SolverOptions | None = None) -> SolveResult:
    """Solve the discrete Euler-Lagrange system by damped Newton.

    Starts from the homogeneous wall; iterates are projected onto the sign
    class (φ ≤ 0 left of 0, φ ≥ 0 right of 0) and, with ``opts.clamp``, onto
    [-π/2, π/2]. Both projections never raise the energy.

    Args:
        w: Weight the grid was built for.
        g: Grid from :func:`build_grid` for *w*.
        opts: Iteration cap, tolerance, damping and clamp; defaults if None.

    Returns:
        The converged profile with its iteration count and final residual.

    Raises:
        NoConvergenceError: If the residual is above tolerance after
            ``opts.max_iterations`` steps or the line search stalls.
        MonotonicityViolationError: If the converged profile is not
            non-decreasing.
    """
    opts = opts or SolverOptions()
    _check_grid(w, g)
    project = _projector(g, clamp=opts.clamp)

    phi = project(homogeneous_wall(0.0).phi(g.nodes))
    energy = planar_energy(g, phi)
    iterations = 0
    while True:
        grad = planar_gradient(g, phi)
        grad[~g.free_mask] = 0.0
        residual = float(np.max(np.abs(grad)))
        logger.debug("newton %3d: G=%.15f residual=%.3e", iterations, energy, residual)
        if residual <= opts.residual_tolerance:
            break
        if iterations >= opts.max_iterations:
            msg = f"Newton stopped after {iterations} steps, residual {residual:.3e}"
            raise NoConvergenceError(msg, iterations=iterations, residual=residual)
        diag, offdiag = planar_hessian_bands(g, phi)
        direction = _descent_direction(g, diag, offdiag, grad)
        phi, energy = _line_search(
            lambda x: planar_energy(g, x),
            project,
            phi,
            energy,
            grad,
            direction,
            opts,
            iterations=iterations,
            residual=residual,
        )
        iterations += 1

    profile = Profile(grid=g, values=phi)
    _check_monotone(profile)
    logger.info(
        "Newton solve converged: %d iterations, residual %.3e", iterations, residual
    )
    return SolveResult(
        profile=profile,
        iterations=iterations,
        final_residual=residual,
        path=SolvePath.NEWTON,
    )


def solve_convex(w: Weight, g: Grid, opts: SolverOptions | None = None) -> SolveResult:
    """Minimize the convex functional E(m₂) by projected Newton on [0, 1].

    The angle is recovered as φ = sign(x) arccos(m₂); the reported residual is
    the planar gradient of that angle, so it compares directly with
    :func:`solve_newton`.

    Raises:
        NoConvergenceError: As for :func:`solve_newton`.
    """
    opts = opts or SolverOptions()
    _check_grid(w, g)
    free = g.free_mask

    def project(m2: FloatArray) -> FloatArray:
        m2 = np.clip(m2, 0.0, 1.0)
        m2[0] = m2[-1] = 0.0
        m2[g.zero_index] = 1.0
        return m2

    m2 = project(np.cos(homogeneous_wall(0.0).phi(g.nodes)))
    energy = energy_E_convex(g, m2)
    iterations = 0
    while True:
        phi = _angle_from_m2(g, m2)
        residual = el_residual(Profile(grid=g, values=phi))
        logger.debug("convex %3d: E=%.15f residual=%.3e", iterations, energy, residual)
        if residual <= opts.residual_tolerance:
            break
        if iterations >= opts.max_iterations:
            msg = (
                f"Convex solve stopped after {iterations} iterations, "
                f"residual {residual:.3e}"
            )
            raise NoConvergenceError(msg, iterations=iterations, residual=residual)
        grad = gradient_E(g, m2)
        grad[~free] = 0.0
        # Bound-active nodes stay put for this step.
        active = ((m2 <= 0.0) & (grad > 0.0)) | ((m2 >= 1.0) & (grad < 0.0))
        grad[active] = 0.0
        diag, offdiag = hessian_E_bands(g, m2)
        direction = _descent_direction(g, diag, offdiag, grad, extra_fixed=active)
        m2, energy = _line_search(
            lambda x: energy_E_convex(g, x),
            project,
            m2,
            energy,
            grad,
            direction,
            opts,
            iterations=iterations,
            residual=residual,
        )
        iterations += 1

    profile = Profile(grid=g, values=_angle_from_m2(g, m2))
    _check_monotone(profile)
    logger.info(
        "Convex solve converged: %d iterations, residual %.3e", iterations, residual
    )
    return SolveResult(
        profile=profile,
        iterations=iterations,
        final_residual=residual,
        path=SolvePath.CONVEX,
    )


def verify_solution(
    w: Weight, r: SolveResult, *, residual_tolerance: float | None = None
) -> VerificationReport:
    """Check monotonicity, range, flux sign, EL residual and (even weights) oddness."""
    tolerance = (
        SolverOptions().residual_tolerance
        if residual_tolerance is None
        else residual_tolerance
    )
    profile = r.profile
    phi = profile.values
    residual = el_residual(profile)
    flux = compute_flux(profile)

    oddness: float | None = None
    odd_ok: bool | None = None
    if classify_weight(w).is_even and profile.grid.is_symmetric():
        oddness = float(np.max(np.abs(phi + phi[::-1])))
        odd_ok = oddness <= tolerance

    report = VerificationReport(
        monotone=bool(np.all(np.diff(phi) >= 0.0)),
        in_range=bool(np.all(np.abs(phi) <= HALF_PI + 1e-15)),
        flux_positive=bool(np.all(flux.cell_flux > 0.0)),
        el_residual=residual,
        el_residual_ok=residual <= tolerance,
        oddness_defect=oddness,
        odd_ok=odd_ok,
    )
    if not report.passed:
        logger.warning("Solution checks failed: %s", report.model_dump())
    return report


def profile_distance(a: Profile, b: Profile) -> float:
    """Sup-norm distance between two profiles on the same grid."""
    return float(np.max(np.abs(a.values - b.values)))


def sample_wall(
    grid: Grid, evaluator: Callable[[FloatArray], FloatArray]
) -> SolveResult:
    """Sample a closed-form wall on *grid* as an oracle-path result.

    The center and both ends are snapped to 0 and ±π/2; the residual is
    whatever the discrete Euler-Lagrange operator sees on the samples.
    """
    values = np.asarray(evaluator(grid.nodes), dtype=float).copy()
    values[grid.zero_index] = 0.0
    values[0], values[-1] = -HALF_PI, HALF_PI
    profile = Profile(grid=grid, values=values)
    return SolveResult(
        profile=profile,
        iterations=0,
        final_residual=el_residual(profile),
        path=SolvePath.ORACLE,
    )


# ---------------------------------------------------------------------------
# Internals
# ---------------------------------------------------------------------------


def _check_grid(w: Weight, g: Grid) -> None:
    if not grid_matches_weight(g, w):
        msg = "Grid cell weights do not match the given weight"
        raise ValueError(msg)


def _projector(g: Grid, *, clamp: bool) -> Callable[[FloatArray], FloatArray]:
    right = g.nodes > 0.0
    left = g.nodes < 0.0

    def project(phi: FloatArray) -> FloatArray:
        phi = np.where(right, np.abs(phi), np.where(left, -np.abs(phi), phi))
        if clamp:
            phi = np.clip(phi, -HALF_PI, HALF_PI)
        phi[0], phi[-1] = -HALF_PI, HALF_PI
        phi[g.zero_index] = 0.0
        return phi

    return project


def _angle_from_m2(g: Grid, m2: FloatArray) -> FloatArray:
    phi = np.sign(g.nodes) * np.arccos(np.clip(m2, 0.0, 1.0))
    phi[0], phi[-1] = -HALF_PI, HALF_PI
    phi[g.zero_index] = 0.0
    return phi


def _banded_solve(
    diag: FloatArray, offdiag: FloatArray, rhs: FloatArray
) -> FloatArray | None:
    bands = np.zeros((3, diag.size))
    bands[0, 1:] = offdiag
    bands[1] = diag
    bands[2, :-1] = offdiag
    try:
        solution = solve_banded((1, 1), bands, rhs)
    except (LinAlgError, ValueError):
        return None
    return solution if np.all(np.isfinite(solution)) else None


def _descent_direction(
    g: Grid,
    diag: FloatArray,
    offdiag: FloatArray,
    grad: FloatArray,
    *,
    extra_fixed: BoolArray | None = None,
) -> FloatArray:
    """Newton direction on the free nodes, or a preconditioned gradient.

    Fixed nodes get identity rows and no coupling, so their component is zero.
    """
    fixed = ~g.free_mask if extra_fixed is None else (~g.free_mask | extra_fixed)
    coupled = ~(fixed[:-1] | fixed[1:])

    def restrict(d: FloatArray, off: FloatArray) -> tuple[FloatArray, FloatArray]:
        d = np.where(fixed, 1.0, d)
        return d, np.where(coupled, off, 0.0)

    newton = _banded_solve(*restrict(diag, offdiag), -grad)
    if newton is not None and float(grad @ newton) < 0.0:
        return newton

    # Kinetic stencil plus lumped weight is positive definite on free nodes.
    stiffness = 2.0 * g.conductance
    kinetic = 2.0 * g.node_weight.copy()
    kinetic[1:] += stiffness
    kinetic[:-1] += stiffness
    logger.debug("Hessian step rejected, using preconditioned gradient")
    fallback = _banded_solve(*restrict(kinetic, -stiffness), -grad)
    return -grad if fallback is None else fallback


def _line_search(
    energy_of: Callable[[FloatArray], float],
    project: Callable[[FloatArray], FloatArray],
    x: FloatArray,
    energy: float,
    grad: FloatArray,
    direction: FloatArray,
    opts: SolverOptions,
    *,
    iterations: int,
    residual: float,
) -> tuple[FloatArray, float]:
    """Backtrack by ``opts.damping`` until projected Armijo decrease holds.

    An accepted trial never has a higher computed energy than *x*.
    """
    step = 1.0
    while step >= MIN_STEP:
        trial = project(x + step * direction)
        trial_energy = energy_of(trial)
        decrease = min(0.0, ARMIJO * float(grad @ (trial - x)))
        if trial_energy <= energy + decrease:
            logger.debug("accepted step %.3e", step)
            return trial, trial_energy
        step *= opts.damping
    msg = f"Line search stalled at iteration {iterations}, residual {residual:.3e}"
    raise NoConvergenceError(msg, iterations=iterations, residual=residual)


def _check_monotone(profile: Profile) -> None:
    steps = np.diff(profile.values)
    if np.any(steps < 0.0):
        worst = int(np.argmin(steps))
        msg = (
            f"Converged profile decreases by {-steps[worst]:.3e} "
            f"at x = {profile.grid.nodes[worst]:.6g}"
        )
        raise MonotonicityViolationError(msg)
