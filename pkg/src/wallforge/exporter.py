"""Write run artifacts: report.json, profile.csv and witness.csv."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from wallforge.diagnostics import FirstIntegralReport, FluxField
from wallforge.energy import Profile
from wallforge.models import Report
from wallforge.stability import Witness

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
PROFILE_FILE = "profile.csv"
WITNESS_FILE = "witness.csv"
FLOAT_FORMAT = "%.17g"


class ReportExporter:
    """Writes analysis results into an output directory."""

    def __init__(self, output_dir: str | Path) -> None:
        self._output_dir = Path(output_dir)

    @property
    def output_dir(self) -> Path:
        return self._output_dir

    def write_report(self, report: Report) -> Path:
        path = self._prepare(REPORT_FILE)
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        logger.info("Report written: %s", path)
        return path

    def write_profile(
        self,
        profile: Profile,
        flux: FluxField,
        first_integral: FirstIntegralReport,
    ) -> Path:
        """Write profile.csv, one row per node: x, phi, flux, first_integral.

        Args:
            profile: Wall profile providing x and phi.
            flux: Flux field of *profile*, averaged to nodes.
            first_integral: First-integral report of *profile*.

        Returns:
            Path to the written CSV.
        """
        columns = np.column_stack(
            [
                profile.grid.nodes,
                profile.values,
                flux.nodal(),
                first_integral.nodal(),
            ]
        )
        return self._write_csv(PROFILE_FILE, columns, "x,phi,flux,first_integral")

    def write_witness(self, profile: Profile, witnesses: list[Witness]) -> Path:
        """Nodal witness directions, one column per epsilon."""
        header = ",".join(["x", *(f"eta_eps_{w.epsilon:g}" for w in witnesses)])
        columns = np.column_stack(
            [profile.grid.nodes, *(w.eta for w in witnesses)]
        )
        return self._write_csv(WITNESS_FILE, columns, header)

    def _write_csv(self, name: str, columns: np.ndarray, header: str) -> Path:
        path = self._prepare(name)
        np.savetxt(
            path, columns, fmt=FLOAT_FORMAT, delimiter=",", header=header, comments=""
        )
        logger.info("Wrote %d rows to %s", columns.shape[0], path)
        return path

    def _prepare(self, name: str) -> Path:
        self._output_dir.mkdir(parents=True, exist_ok=True)
        return self._output_dir / name


def load_report(path: str | Path) -> Report:
    """Parse a report.json written by :class:`ReportExporter`."""
    return Report.model_validate_json(Path(path).read_text(encoding="utf-8"))
