"""Output folder resolution for analysis runs."""

from __future__ import annotations

import os
import re
from pathlib import Path

OUTPUT_DIR_ENV = "WALLFORGE_OUTPUT_DIR"


class OutputLayout:
    """Resolve where a run writes its report files.

    Resolution order:

    1. the ``WALLFORGE_OUTPUT_DIR`` environment variable;
    2. ``output_dir`` from the config, relative to the config file's folder;
    3. ``<config dir>/output/run-NNN``, auto-sequential.
    """

    _RUN_PATTERN = re.compile(r"^run-(\d{3})$")

    def __init__(self, config_path: str | Path) -> None:
        self._root = Path(config_path).resolve().parent

    @property
    def root(self) -> Path:
        return self._root

    @property
    def runs_dir(self) -> Path:
        return self._root / "output"

    def resolve(self, configured: str | None = None) -> Path:
        """Return the output directory for this run, creating it."""
        override = os.environ.get(OUTPUT_DIR_ENV)
        if override:
            target = Path(override)
        elif configured is not None:
            target = Path(configured)
            if not target.is_absolute():
                target = self._root / target
        else:
            target = self.run_dir()
        target.mkdir(parents=True, exist_ok=True)
        return target

    def run_dir(self, name: str | None = None) -> Path:
        """Named sub-directory of ``output/``, or the next ``run-NNN``."""
        if name is not None:
            return self.runs_dir / name
        return self.runs_dir / self._next_run_name()

    def _next_run_name(self) -> str:
        """Scan ``output/`` for ``run-\\d{3}`` dirs, return next name."""
        max_n = 0
        if self.runs_dir.is_dir():
            for child in self.runs_dir.iterdir():
                if child.is_dir():
                    m = self._RUN_PATTERN.match(child.name)
                    if m:
                        max_n = max(max_n, int(m.group(1)))
        return f"run-{max_n + 1:03d}"
