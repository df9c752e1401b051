"""Truncated symmetric mesh on [-L, L] with cell-constant weights."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from wallforge.errors import DomainTooSmallError
from wallforge.weight import BoolArray, FloatArray, IndexArray, Weight, classify_weight

logger = logging.getLogger(__name__)

DEFAULT_HALF_LENGTH = 12.0
DEFAULT_CELLS_PER_UNIT = 200
MIN_CELLS_PER_UNIT = 4


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes x_0 = -L < ... < x_n = L with 0 and every breakpoint as a node.

    Cell c spans [x_c, x_{c+1}] and carries the constant weight
    ``cell_weights[c]``. Node quantities are lumped from the two adjacent
    cells (half a cell each).
    """

    half_length: float
    nodes: FloatArray
    zero_index: int
    cell_weights: FloatArray

    @property
    def node_count(self) -> int:
        return int(self.nodes.size)

    @property
    def cell_count(self) -> int:
        return int(self.nodes.size) - 1

    @cached_property
    def widths(self) -> FloatArray:
        return np.diff(self.nodes)

    @cached_property
    def midpoints(self) -> FloatArray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    @cached_property
    def conductance(self) -> FloatArray:
        """Per-cell a_c / h_c."""
        return self.cell_weights / self.widths

    @cached_property
    def mass(self) -> FloatArray:
        """Lumped node length: half of each adjacent cell."""
        return _lump(0.5 * self.widths)

    @cached_property
    def node_weight(self) -> FloatArray:
        """Lumped weighted length α_i = Σ_adjacent a_c h_c / 2."""
        return _lump(0.5 * self.cell_weights * self.widths)

    @cached_property
    def boundary_mask(self) -> BoolArray:
        mask = np.zeros(self.node_count, dtype=bool)
        mask[[0, -1]] = True
        return mask

    @cached_property
    def free_mask(self) -> BoolArray:
        """Interior nodes other than the pinned center."""
        mask = ~self.boundary_mask
        mask[self.zero_index] = False
        return mask

    @cached_property
    def jump_nodes(self) -> IndexArray:
        """Indices of nodes where the cell weight changes."""
        return np.flatnonzero(np.diff(self.cell_weights) != 0.0) + 1

    def node_index(self, x: float) -> int:
        """Index of the node closest to *x*."""
        return int(np.argmin(np.abs(self.nodes - x)))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.nodes, -self.nodes[::-1]))


def _lump(cell_values: FloatArray) -> FloatArray:
    lumped = np.zeros(cell_values.size + 1)
    lumped[:-1] += cell_values
    lumped[1:] += cell_values
    return lumped


def _subdivide(anchors: list[float], cells_per_unit: int) -> FloatArray:
    """Split each anchor segment uniformly with spacing at most 1/cells_per_unit."""
    pieces = [np.array([anchors[0]])]
    for left, right in zip(anchors, anchors[1:]):
        count = max(1, math.ceil((right - left) * cells_per_unit - 1e-9))
        pieces.append(np.linspace(left, right, count + 1)[1:])
    return np.concatenate(pieces)


def build_grid(
    w: Weight,
    half_length: float = DEFAULT_HALF_LENGTH,
    cells_per_unit: int = DEFAULT_CELLS_PER_UNIT,
) -> Grid:
    """Build the truncated mesh for weight *w*.

    Args:
        w: Weight whose breakpoints become nodes.
        half_length: Truncation L of the domain [-L, L].
        cells_per_unit: Cells per unit length, rounded up per segment.

    Returns:
        The grid, mirrored about 0 when *w* is even.

    Raises:
        DomainTooSmallError: If a breakpoint does not sit inside (-L + 1, L - 1).
        ValueError: If ``cells_per_unit`` is below 4.
    """
    if cells_per_unit < MIN_CELLS_PER_UNIT:
        msg = f"cells_per_unit must be >= {MIN_CELLS_PER_UNIT}, got {cells_per_unit}"
        raise ValueError(msg)
    reach = max((abs(b) for b in w.breakpoints), default=0.0)
    if not half_length > reach + 1.0:
        msg = (
            f"half_length {half_length} must exceed max |breakpoint| + 1 "
            f"= {reach + 1.0}"
        )
        raise DomainTooSmallError(msg)

    if classify_weight(w).is_even:
        # Build [0, L] and mirror it so the mesh is exactly symmetric.
        anchors = sorted({0.0, half_length, *(b for b in w.breakpoints if b > 0)})
        positive = _subdivide(anchors, cells_per_unit)
        nodes = np.concatenate([-positive[:0:-1], positive])
    else:
        anchors = sorted({-half_length, 0.0, half_length, *w.breakpoints})
        nodes = _subdivide(anchors, cells_per_unit)

    nodes[0], nodes[-1] = -half_length, half_length
    zero_index = int(np.flatnonzero(nodes == 0.0)[0])
    midpoints = 0.5 * (nodes[:-1] + nodes[1:])
    grid = Grid(
        half_length=float(half_length),
        nodes=nodes,
        zero_index=zero_index,
        cell_weights=w.at(midpoints),
    )
    logger.debug(
        "Built grid: %d cells on [-%g, %g]", grid.cell_count, half_length, half_length
    )
    return grid


def grid_matches_weight(grid: Grid, w: Weight) -> bool:
    """True when every cell weight equals a at the cell midpoint."""
    return bool(np.array_equal(grid.cell_weights, w.at(grid.midpoints)))
