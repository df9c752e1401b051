"""Discrete wall energies G(φ), E(m₂), F(m) and their derivatives.

All three energies come from one lumped functional on the grid:

    F(m) = Σ_c (a_c/h_c) |m_{c+1} − m_c|² + Σ_i α_i (m₂² + m₃²)_i

G is F restricted to planar maps (sinφ, cosφ, 0), E is G rewritten in the
variable m₂ = cosφ. Nodal arrays cover every node; the pinned nodes (both ends
and the center) are masked by the callers that need it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from wallforge.grid import Grid
from wallforge.weight import FloatArray

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-12
EPS_FLOOR = 1e-10
HALF_PI = 0.5 * np.pi


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Profile:
    """Nodal angle φ with φ(0) = 0 and φ(±L) = ±π/2."""

    grid: Grid
    values: FloatArray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            msg = f"Profile needs {self.grid.node_count} values, got {values.shape}"
            raise ValueError(msg)
        if values[self.grid.zero_index] != 0.0:
            msg = f"Profile must vanish at x = 0, got {values[self.grid.zero_index]}"
            raise ValueError(msg)
        if abs(values[0] + HALF_PI) > UNIT_TOLERANCE or abs(
            values[-1] - HALF_PI
        ) > UNIT_TOLERANCE:
            msg = f"Profile ends must be -pi/2 and pi/2, got {values[0]}, {values[-1]}"
            raise ValueError(msg)
        object.__setattr__(self, "values", values)

    def with_values(self, values: FloatArray) -> Profile:
        return Profile(grid=self.grid, values=values)


@dataclass(frozen=True, eq=False)
class SphereMap:
    """Nodal unit vectors m = (m₁, m₂, m₃), shape (nodes, 3).

    With ``pinned`` the ends must be m(-L) = -e₁ and m(L) = +e₁.
    """

    grid: Grid
    values: FloatArray
    pinned: bool = True

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.node_count, 3):
            expected = (self.grid.node_count, 3)
            msg = f"SphereMap needs shape {expected}, got {values.shape}"
            raise ValueError(msg)
        defect = float(np.max(np.abs(np.linalg.norm(values, axis=1) - 1.0)))
        if defect > UNIT_TOLERANCE:
            msg = f"SphereMap leaves the unit sphere by {defect:.3e}"
            raise ValueError(msg)
        if self.pinned:
            ends = np.array([[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
            if not np.allclose(values[[0, -1]], ends, atol=UNIT_TOLERANCE, rtol=0.0):
                msg = "Pinned SphereMap must equal -e1 at -L and +e1 at L"
                raise ValueError(msg)
        object.__setattr__(self, "values", values)

    @property
    def m1(self) -> FloatArray:
        return self.values[:, 0]

    @property
    def m2(self) -> FloatArray:
        return self.values[:, 1]

    @property
    def m3(self) -> FloatArray:
        return self.values[:, 2]


def planar_map(p: Profile) -> SphereMap:
    """Embed φ as m = (sinφ, cosφ, 0)."""
    phi = p.values
    values = np.column_stack([np.sin(phi), np.cos(phi), np.zeros_like(phi)])
    # sin(±π/2) is exactly ±1 but cos(±π/2) is ~6e-17; snap the ends.
    values[0], values[-1] = (-1.0, 0.0, 0.0), (1.0, 0.0, 0.0)
    return SphereMap(grid=p.grid, values=values)


# ---------------------------------------------------------------------------
# Planar energy G
# ---------------------------------------------------------------------------


def planar_energy(grid: Grid, phi: FloatArray) -> float:
    """G on raw nodal values, no constraint checks."""
    # 2(1 − cos Δφ) = 4 sin²(Δφ/2), free of cancellation.
    kinetic = np.sum(grid.conductance * 4.0 * np.sin(0.5 * np.diff(phi)) ** 2)
    potential = np.sum(grid.node_weight * np.cos(phi) ** 2)
    return float(kinetic + potential)


def planar_gradient(grid: Grid, phi: FloatArray) -> FloatArray:
    """Full nodal gradient of G, constrained nodes included."""
    chord_flux = grid.conductance * np.sin(np.diff(phi))
    grad = -grid.node_weight * np.sin(2.0 * phi)
    grad[1:] += 2.0 * chord_flux
    grad[:-1] -= 2.0 * chord_flux
    return grad


def planar_hessian_bands(grid: Grid, phi: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Diagonal and off-diagonal of the (tridiagonal) Hessian of G."""
    coupling = 2.0 * grid.conductance * np.cos(np.diff(phi))
    diag = -2.0 * grid.node_weight * np.cos(2.0 * phi)
    diag[1:] += coupling
    diag[:-1] += coupling
    return diag, -coupling


def energy_G(p: Profile) -> float:
    """Discrete planar energy of a wall profile."""
    return planar_energy(p.grid, p.values)


def gradient_G(p: Profile) -> FloatArray:
    """Gradient of G with zeros on the pinned nodes.

    The free components are the discrete Euler-Lagrange residual.
    """
    grad = planar_gradient(p.grid, p.values)
    grad[~p.grid.free_mask] = 0.0
    return grad


def el_residual(p: Profile) -> float:
    """Max-norm of the Euler-Lagrange residual on free nodes."""
    return float(np.max(np.abs(gradient_G(p)), initial=0.0))


# ---------------------------------------------------------------------------
# Convex reformulation E(m₂)
# ---------------------------------------------------------------------------


def _complement(m2: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """s = √(1 − m²) with its first two derivatives, floored near |m| = 1."""
    radicand = 1.0 - m2**2
    s = np.sqrt(np.clip(radicand, 0.0, None))
    floored = np.sqrt(np.maximum(radicand, EPS_FLOOR))
    return s, -m2 / floored, -1.0 / floored**3


def energy_E_convex(grid: Grid, m2: FloatArray) -> float:
    """Discrete E(m₂) = Σ (a/h)[(Δm₂)² + (Δs)²] + Σ α m₂²."""
    s, _, _ = _complement(m2)
    kinetic = np.sum(grid.conductance * (np.diff(m2) ** 2 + np.diff(s) ** 2))
    return float(kinetic + np.sum(grid.node_weight * m2**2))


def gradient_E(grid: Grid, m2: FloatArray) -> FloatArray:
    """Full nodal gradient of E."""
    s, ds, _ = _complement(m2)
    dm, dsc = np.diff(m2), np.diff(s)
    k = grid.conductance
    grad = 2.0 * grid.node_weight * m2
    grad[:-1] -= 2.0 * k * (dm + dsc * ds[:-1])
    grad[1:] += 2.0 * k * (dm + dsc * ds[1:])
    return grad


def hessian_E_bands(grid: Grid, m2: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Diagonal and off-diagonal of the Hessian of E."""
    s, ds, dds = _complement(m2)
    dsc = np.diff(s)
    k = grid.conductance
    diag = 2.0 * grid.node_weight.copy()
    diag[:-1] += 2.0 * k * (1.0 + ds[:-1] ** 2 - dsc * dds[:-1])
    diag[1:] += 2.0 * k * (1.0 + ds[1:] ** 2 + dsc * dds[1:])
    offdiag = -2.0 * k * (1.0 + ds[:-1] * ds[1:])
    return diag, offdiag


# ---------------------------------------------------------------------------
# Sphere energy F
# ---------------------------------------------------------------------------


def energy_F(m: SphereMap) -> float:
    """Discrete micromagnetic energy of a sphere-valued map."""
    grid = m.grid
    jumps = np.diff(m.values, axis=0)
    kinetic = np.sum(grid.conductance * np.sum(jumps**2, axis=1))
    potential = np.sum(grid.node_weight * (m.m2**2 + m.m3**2))
    return float(kinetic + potential)


def reduce_to_planar(m: SphereMap) -> SphereMap:
    """Fold (m₂, m₃) onto the nonnegative m₂ axis; F never increases."""
    values = np.column_stack(
        [m.m1, np.hypot(m.m2, m.m3), np.zeros(m.grid.node_count)]
    )
    return SphereMap(grid=m.grid, values=values, pinned=m.pinned)
