"""Flux, first integrals and the monotonicity facts of a converged wall."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from wallforge.energy import Profile
from wallforge.grid import Grid
from wallforge.weight import FloatArray, Weight, classify_weight

logger = logging.getLogger(__name__)

MONOTONICITY_SLACK = 1e-8


@dataclass(frozen=True)
class FluxJump:
    """Flux discontinuity at one weight breakpoint.

    ``jump`` compares one-sided fluxes extrapolated linearly to the node from
    the two nearest cells on each side; ``raw_jump`` compares the two adjacent
    cell values.
    """

    node: int
    x: float
    jump: float
    raw_jump: float


@dataclass(frozen=True, eq=False)
class FluxField:
    """Per-cell flux ξ_c = a_c Δφ_c / h_c."""

    grid: Grid
    cell_flux: FloatArray
    jumps: tuple[FluxJump, ...]

    def nodal(self) -> FloatArray:
        """Average of the adjacent cells; end nodes take their only cell."""
        flux = self.cell_flux
        nodal = np.empty(flux.size + 1)
        nodal[0], nodal[-1] = flux[0], flux[-1]
        nodal[1:-1] = 0.5 * (flux[:-1] + flux[1:])
        return nodal

    def at_center(self) -> float:
        return float(self.nodal()[self.grid.zero_index])

    def max_jump(self) -> float:
        return max((j.jump for j in self.jumps), default=0.0)


@dataclass(frozen=True)
class FluxMonotonicityReport:
    flux_nonincreasing: bool
    max_flux_increase: float
    slope_nonincreasing: bool | None
    max_slope_increase: float | None

    @property
    def passed(self) -> bool:
        return self.flux_nonincreasing and self.slope_nonincreasing is not False


@dataclass(frozen=True, eq=False)
class IntervalIntegral:
    """(φ')² − cos²φ sampled at cell midpoints of one constant-weight interval."""

    left: float
    right: float
    weight: float
    values: FloatArray

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.values - self.mean)))


@dataclass(frozen=True, eq=False)
class FirstIntegralReport:
    per_interval: tuple[IntervalIntegral, ...]
    cell_values: FloatArray

    def interval(self, left: float, right: float) -> IntervalIntegral:
        """The interval whose ends are closest to (left, right)."""
        return min(
            self.per_interval,
            key=lambda item: abs(item.left - left) + abs(item.right - right),
        )

    def nodal(self) -> FloatArray:
        values = self.cell_values
        nodal = np.empty(values.size + 1)
        nodal[0], nodal[-1] = values[0], values[-1]
        nodal[1:-1] = 0.5 * (values[:-1] + values[1:])
        return nodal


# ---------------------------------------------------------------------------
# Flux
# ---------------------------------------------------------------------------


def compute_flux(p: Profile) -> FluxField:
    """Per-cell flux with its jumps across every weight breakpoint.

    Args:
        p: Wall profile on a breakpoint-aligned grid.

    Returns:
        Cell fluxes a Δφ/h and one jump record per interior breakpoint.
    """
    grid = p.grid
    flux = grid.conductance * np.diff(p.values)
    jumps = tuple(_jump_at(grid, flux, int(node)) for node in grid.jump_nodes)
    return FluxField(grid=grid, cell_flux=flux, jumps=jumps)


def _jump_at(grid: Grid, flux: FloatArray, node: int) -> FluxJump:
    x = float(grid.nodes[node])
    mid = grid.midpoints
    weights = grid.cell_weights

    def one_sided(near: int, far: int) -> float:
        inside = 0 <= far < flux.size and weights[far] == weights[near]
        if not inside:
            return float(flux[near])
        slope = (flux[near] - flux[far]) / (mid[near] - mid[far])
        return float(flux[near] + slope * (x - mid[near]))

    left = one_sided(node - 1, node - 2)
    right = one_sided(node, node + 1)
    return FluxJump(
        node=node,
        x=x,
        jump=abs(right - left),
        raw_jump=float(abs(flux[node] - flux[node - 1])),
    )


def flux_monotonicity(w: Weight, f: FluxField) -> FluxMonotonicityReport:
    """ξ is non-increasing on (0, L); φ' too when a is non-decreasing there."""
    grid = f.grid
    positive = grid.midpoints > 0.0
    flux_rise = float(np.max(np.diff(f.cell_flux[positive]), initial=0.0))

    slope_ok: bool | None = None
    slope_rise: float | None = None
    if classify_weight(w).is_nondecreasing_on_positive:
        slope = f.cell_flux[positive] / grid.cell_weights[positive]
        slope_rise = float(np.max(np.diff(slope), initial=0.0))
        slope_ok = slope_rise <= MONOTONICITY_SLACK

    report = FluxMonotonicityReport(
        flux_nonincreasing=flux_rise <= MONOTONICITY_SLACK,
        max_flux_increase=flux_rise,
        slope_nonincreasing=slope_ok,
        max_slope_increase=slope_rise,
    )
    logger.debug("Flux monotonicity: %s", report)
    return report


# ---------------------------------------------------------------------------
# First integral
# ---------------------------------------------------------------------------


def first_integral(p: Profile) -> FirstIntegralReport:
    """(φ')² − cos²φ per cell, grouped by constant-weight interval.

    Intervals are split at every weight breakpoint and at 0.
    """
    grid = p.grid
    phi = p.values
    slope = np.diff(phi) / grid.widths
    middle = 0.5 * (phi[:-1] + phi[1:])
    values = slope**2 - np.cos(middle) ** 2

    splits = sorted({0, grid.zero_index, grid.cell_count, *map(int, grid.jump_nodes)})
    intervals = tuple(
        IntervalIntegral(
            left=float(grid.nodes[lo]),
            right=float(grid.nodes[hi]),
            weight=float(grid.cell_weights[lo]),
            values=values[lo:hi],
        )
        for lo, hi in zip(splits, splits[1:])
    )
    return FirstIntegralReport(per_interval=intervals, cell_values=values)
