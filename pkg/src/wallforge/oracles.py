"""Closed-form and quadrature reference walls.

Two walls are known exactly: the homogeneous (Gudermannian) wall for a ≡ 1,
and the wall for the step weight a = 2 on (-1, 1), a = 1 elsewhere, whose
center slope d solves a scalar integral equation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import bisect

from wallforge.errors import NoSignChangeError
from wallforge.weight import FloatArray, Weight, step_weight

logger = logging.getLogger(__name__)

QUAD_ABS_TOL = 1e-13
ROOT_XTOL = 1e-12
SCAN_POINTS = 200
TABLE_SAMPLES = 2000
TAIL_MARGIN = 40.0

# ---------------------------------------------------------------------------
# Homogeneous wall
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HomogeneousWall:
    """φ(x) = π/2 − 2 arctan(e^{−(x − x0)}), the a ≡ 1 wall centered at x0."""

    x0: float = 0.0
    energy: float = 4.0

    def phi(self, x: ArrayLike) -> FloatArray:
        shifted = np.asarray(x, dtype=float) - self.x0
        with np.errstate(over="ignore"):
            return 0.5 * np.pi - 2.0 * np.arctan(np.exp(-shifted))

    def slope(self, x: ArrayLike) -> FloatArray:
        """Exact derivative sech(x − x0), which equals cos φ."""
        shifted = np.asarray(x, dtype=float) - self.x0
        with np.errstate(over="ignore"):
            return 1.0 / np.cosh(shifted)

    def sin_phi(self, x: ArrayLike) -> FloatArray:
        return np.tanh(np.asarray(x, dtype=float) - self.x0)


def homogeneous_wall(x0: float = 0.0) -> HomogeneousWall:
    return HomogeneousWall(x0=float(x0))


# ---------------------------------------------------------------------------
# Step-weight wall
# ---------------------------------------------------------------------------


def _upper_limit(d: float) -> float:
    """φ(1) as a function of the center slope: arccos √(4(1 − d²)/3)."""
    return math.acos(math.sqrt(4.0 * (1.0 - d * d) / 3.0))


def _inner_speed(phi: float, d: float) -> float:
    return math.sqrt(math.cos(phi) ** 2 + d * d - 1.0)


def _inner_length(lower: float, upper: float, d: float) -> float:
    value, _ = quad(
        lambda t: 1.0 / _inner_speed(t, d),
        lower,
        upper,
        epsabs=QUAD_ABS_TOL,
        epsrel=QUAD_ABS_TOL,
        limit=200,
    )
    return float(value)


def matching_residual(d: float) -> float:
    """Φ(d): length of the inner branch minus one. Its root is the center slope."""
    return _inner_length(0.0, _upper_limit(d), d) - 1.0


def step_weight_d() -> float:
    """Center slope of the step-weight wall, the root of Φ on (1/2, 1).

    Raises:
        NoSignChangeError: If no bracketing sign change is found on the scan.
    """
    candidates = np.linspace(0.5 + 1e-3, 1.0 - 1e-6, SCAN_POINTS)
    values = np.array([matching_residual(float(d)) for d in candidates])
    changes = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    if changes.size == 0:
        msg = (
            f"Matching residual keeps one sign on ({candidates[0]}, "
            f"{candidates[-1]}): [{values.min():.3e}, {values.max():.3e}]"
        )
        raise NoSignChangeError(msg)
    if changes.size > 1:
        logger.warning("Matching residual changes sign %d times", changes.size)
    k = int(changes[0])
    d = float(
        bisect(
            matching_residual,
            float(candidates[k]),
            float(candidates[k + 1]),
            xtol=ROOT_XTOL,
        )
    )
    logger.debug("Step-weight center slope d = %.15f", d)
    return d


@dataclass(frozen=True, eq=False)
class StepWallClosedForm:
    """Exact wall for the step weight, odd on ℝ.

    Inner branch (0, 1): φ' = √(cos²φ + d² − 1), stored as the inverse table
    x(φ). Outer branch (1, ∞): sin φ = tanh(x − outer_shift).
    """

    d: float
    phi_at_1: float
    table_phi: FloatArray
    table_x: FloatArray
    outer_shift: float

    @property
    def inner_constant(self) -> float:
        """(φ')² − cos²φ on (0, 1)."""
        return self.d**2 - 1.0

    def matching_defect(self) -> float:
        """|cos φ(1) − 2 √(cos²φ(1) + d² − 1)|, zero for a continuous flux."""
        cos1 = math.cos(self.phi_at_1)
        return abs(cos1 - 2.0 * _inner_speed(self.phi_at_1, self.d))

    def inverse_table_end(self) -> float:
        """x(φ(1)) from the table; equals 1 up to quadrature error."""
        return float(self.table_x[-1])

    @cached_property
    def _inner(self) -> PchipInterpolator:
        return PchipInterpolator(self.table_x, self.table_phi, extrapolate=True)

    def phi(self, x: ArrayLike) -> FloatArray:
        xs = np.asarray(x, dtype=float)
        y = np.abs(xs)
        inner = self._inner(np.minimum(y, 1.0))
        outer = np.arcsin(np.tanh(y - self.outer_shift))
        return np.sign(xs) * np.where(y <= 1.0, inner, outer)

    def slope(self, x: ArrayLike) -> FloatArray:
        y = np.abs(np.asarray(x, dtype=float))
        cos_phi = np.cos(self.phi(y))
        inner = np.sqrt(np.maximum(cos_phi**2 + self.d**2 - 1.0, 0.0))
        return np.where(y < 1.0, inner, cos_phi)

    def flux(self, x: ArrayLike) -> FloatArray:
        y = np.abs(np.asarray(x, dtype=float))
        return np.where(y < 1.0, 2.0, 1.0) * self.slope(y)

    def energy(self) -> float:
        """Exact G over ℝ, integrated in the φ variable on each branch."""
        d = self.d
        inner, _ = quad(
            lambda t: 2.0
            * (2.0 * math.cos(t) ** 2 + d * d - 1.0)
            / _inner_speed(t, d),
            0.0,
            self.phi_at_1,
            epsabs=QUAD_ABS_TOL,
            epsrel=QUAD_ABS_TOL,
        )
        outer = 2.0 * (1.0 - math.sin(self.phi_at_1))
        return 2.0 * (float(inner) + outer)

    def instability_limit(self) -> float:
        """Limit of Q(η_ε)/2 as ε → 0: −3 sin φ(1) cos² φ(1)."""
        return -3.0 * math.sin(self.phi_at_1) * math.cos(self.phi_at_1) ** 2


def step_wall_closed_form(d: float | None = None) -> StepWallClosedForm:
    """Build the step-weight wall from its center slope (solved if omitted)."""
    if d is None:
        d = step_weight_d()
    phi_at_1 = _upper_limit(d)
    table_phi = np.linspace(0.0, phi_at_1, TABLE_SAMPLES)
    pieces = [
        _inner_length(float(lo), float(hi), d)
        for lo, hi in zip(table_phi[:-1], table_phi[1:])
    ]
    table_x = np.concatenate([[0.0], np.cumsum(pieces)])
    outer_shift = 1.0 - math.atanh(math.sin(phi_at_1))
    logger.debug(
        "Step wall: d=%.12f, phi(1)=%.12f, x(phi(1))=%.3e off",
        d,
        phi_at_1,
        table_x[-1] - 1.0,
    )
    return StepWallClosedForm(
        d=d,
        phi_at_1=phi_at_1,
        table_phi=table_phi,
        table_x=table_x,
        outer_shift=outer_shift,
    )


# ---------------------------------------------------------------------------
# Translated walls
# ---------------------------------------------------------------------------


def _segments(w: Weight) -> list[tuple[float, float, float]]:
    edges = [-math.inf, *w.breakpoints, math.inf]
    return [
        (edges[k], edges[k + 1], value) for k, value in enumerate(w.segment_values)
    ]


def translated_wall_energy(x0: float, weight: Weight | None = None) -> float:
    """G of the homogeneous wall centered at x0 under a piecewise-constant weight.

    With a ≡ 1 the density is 2 sech²(x − x0), so each segment contributes
    2 v_k [tanh(r_k − x0) − tanh(l_k − x0)]. For the step weight this is
    4 + 2[sin φ̂]₋₁¹.
    """
    w = step_weight() if weight is None else weight
    total = 0.0
    for left, right, value in _segments(w):
        total += 2.0 * value * (math.tanh(right - x0) - math.tanh(left - x0))
    return total


def translated_wall_energy_quadrature(x0: float, weight: Weight | None = None) -> float:
    """Same energy by direct quadrature of a[(φ̂')² + cos²φ̂]."""
    w = step_weight() if weight is None else weight
    wall = homogeneous_wall(x0)
    lower = min([x0, *w.breakpoints]) - TAIL_MARGIN
    upper = max([x0, *w.breakpoints]) + TAIL_MARGIN

    def density(x: float) -> float:
        a = float(w.at(x))
        slope = float(wall.slope(x))
        return a * (slope**2 + math.cos(float(wall.phi(x))) ** 2)

    value, _ = quad(
        density,
        lower,
        upper,
        points=sorted({x0, *w.breakpoints}),
        epsabs=QUAD_ABS_TOL,
        limit=400,
    )
    return float(value)
