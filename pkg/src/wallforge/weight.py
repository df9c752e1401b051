"""Piecewise-constant coercive weights a(x)."""

from __future__ import annotations

from typing import TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, computed_field, model_validator

from wallforge.errors import NonPositiveValueError, UnsortedBreakpointsError

FloatArray: TypeAlias = NDArray[np.float64]
BoolArray: TypeAlias = NDArray[np.bool_]
IndexArray: TypeAlias = NDArray[np.intp]


class Weight(BaseModel):
    """Coefficient a(x), constant between consecutive breakpoints.

    ``segment_values[k]`` is the value on the k-th interval, counting the two
    unbounded end intervals, so there is one more value than breakpoints.
    Breakpoints belong to the interval on their right.
    """

    model_config = ConfigDict(frozen=True)

    breakpoints: tuple[float, ...] = ()
    segment_values: tuple[float, ...]

    @model_validator(mode="after")
    def _check_segments(self) -> Weight:
        if len(self.segment_values) != len(self.breakpoints) + 1:
            msg = (
                f"Expected {len(self.breakpoints) + 1} segment values for "
                f"{len(self.breakpoints)} breakpoints, got {len(self.segment_values)}"
            )
            raise ValueError(msg)
        bad = [v for v in self.segment_values if not v > 0.0]
        if bad:
            msg = f"Weight values must be positive, got {bad}"
            raise NonPositiveValueError(msg)
        if any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
            msg = f"Breakpoints must be strictly increasing: {list(self.breakpoints)}"
            raise UnsortedBreakpointsError(msg)
        return self

    @computed_field  # type: ignore[prop-decorator]
    @property
    def a_lower(self) -> float:
        """Essential infimum a₀."""
        return min(self.segment_values)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def a_upper(self) -> float:
        """Essential supremum A₀."""
        return max(self.segment_values)

    def at(self, x: ArrayLike) -> FloatArray:
        """Vectorized right-continuous evaluation."""
        index = np.searchsorted(
            np.asarray(self.breakpoints, dtype=float), x, side="right"
        )
        return np.asarray(self.segment_values, dtype=float)[index]


class WeightTraits(BaseModel):
    """Symmetry and monotonicity flags derived from a weight."""

    model_config = ConfigDict(frozen=True)

    is_even: bool
    is_nondecreasing_on_positive: bool


def weight_from_segments(
    breakpoints: ArrayLike, values: ArrayLike
) -> Weight:
    """Build a weight from its jump positions and segment values.

    Raises:
        NonPositiveValueError: If any value is not strictly positive.
        UnsortedBreakpointsError: If breakpoints are not strictly increasing.
    """
    return Weight(
        breakpoints=tuple(float(b) for b in np.atleast_1d(breakpoints)),
        segment_values=tuple(float(v) for v in np.atleast_1d(values)),
    )


def homogeneous_weight(value: float = 1.0) -> Weight:
    """Constant weight a ≡ value."""
    return weight_from_segments([], [value])


def step_weight() -> Weight:
    """The notched wire: a = 2 on (-1, 1) and a = 1 elsewhere."""
    return weight_from_segments([-1.0, 1.0], [1.0, 2.0, 1.0])


def eval_weight(w: Weight, x: float) -> float:
    """Return a(x), taking the right-hand value at a breakpoint."""
    return float(w.at(x))


def mirror_weight(w: Weight) -> Weight:
    """Return x ↦ a(-x) (breakpoints negated and reversed)."""
    return Weight(
        breakpoints=tuple(-b for b in reversed(w.breakpoints)),
        segment_values=tuple(reversed(w.segment_values)),
    )


def classify_weight(w: Weight) -> WeightTraits:
    """Derive evenness and monotonicity on (0, ∞) from the segments."""
    breakpoints = np.asarray(w.breakpoints, dtype=float)
    values = np.asarray(w.segment_values, dtype=float)

    is_even = bool(
        np.array_equal(breakpoints, -breakpoints[::-1])
        and np.array_equal(values, values[::-1])
    )
    # Index of the segment holding 0⁺.
    first_positive = int(np.searchsorted(breakpoints, 0.0, side="right"))
    is_nondecreasing = bool(np.all(np.diff(values[first_positive:]) >= 0.0))
    return WeightTraits(
        is_even=is_even, is_nondecreasing_on_positive=is_nondecreasing
    )
