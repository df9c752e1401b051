"""Shared test fixtures for wallforge tests."""

from __future__ import annotations

import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from wallforge.grid import Grid, build_grid
from wallforge.oracles import StepWallClosedForm, step_wall_closed_form
from wallforge.wall_solver import SolveResult, solve_newton
from wallforge.weight import (
    Weight,
    homogeneous_weight,
    step_weight,
    weight_from_segments,
)

TEST_CELLS_PER_UNIT = 100


@pytest.fixture(scope="session")
def unit_weight() -> Weight:
    return homogeneous_weight()


@pytest.fixture(scope="session")
def notched_weight() -> Weight:
    """a = 2 on (-1, 1), 1 elsewhere."""
    return step_weight()


@pytest.fixture(scope="session")
def even_weight() -> Weight:
    """a = 1 on (-1, 1), 2 elsewhere: even and non-decreasing on (0, ∞)."""
    return weight_from_segments([-1.0, 1.0], [2.0, 1.0, 2.0])


@pytest.fixture(scope="session")
def skew_weight() -> Weight:
    """Neither even nor monotone on (0, ∞)."""
    return weight_from_segments([-2.0, 0.5, 3.0], [1.5, 1.0, 3.0, 0.8])


@pytest.fixture(scope="session")
def unit_grid(unit_weight: Weight) -> Grid:
    return build_grid(unit_weight, 12.0, TEST_CELLS_PER_UNIT)


@pytest.fixture(scope="session")
def notched_grid(notched_weight: Weight) -> Grid:
    return build_grid(notched_weight, 12.0, TEST_CELLS_PER_UNIT)


@pytest.fixture(scope="session")
def even_grid(even_weight: Weight) -> Grid:
    return build_grid(even_weight, 12.0, TEST_CELLS_PER_UNIT)


@pytest.fixture(scope="session")
def unit_wall(unit_weight: Weight, unit_grid: Grid) -> SolveResult:
    return solve_newton(unit_weight, unit_grid)


@pytest.fixture(scope="session")
def notched_wall(notched_weight: Weight, notched_grid: Grid) -> SolveResult:
    return solve_newton(notched_weight, notched_grid)


@pytest.fixture(scope="session")
def even_wall(even_weight: Weight, even_grid: Grid) -> SolveResult:
    return solve_newton(even_weight, even_grid)


@pytest.fixture(scope="session")
def step_form() -> StepWallClosedForm:
    return step_wall_closed_form()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    """Write a JSON run config into tmp_path and return its path."""

    def _write(name: str = "config.json", **fields: Any) -> Path:
        payload: dict[str, Any] = {
            "weight": {"breakpoints": [], "values": [1.0]},
            "cells_per_unit": 50,
            "analyses": ["solve"],
            "output_dir": "out",
        }
        payload.update(fields)
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return _write
