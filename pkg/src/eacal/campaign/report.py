"""Calibration report: shape estimate, magnitude statistics and AMR/PAR."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..ea_model import ShapeEstimate, shape_estimate
from ..errors import MissingReferenceError
from ..estimator import CalibrationResult, SnapshotSet, calibrate
from ..metrics import MagnitudeSeries, SectorStats, amr, avg_magnitude, par, sector_average
from .config import CampaignConfig
from .simulate import GroundTruth


@dataclass
class CampaignReport:
    label: str
    calibration: CalibrationResult
    aoas: np.ndarray
    alpha_bar: float
    beta_bar: np.ndarray
    shape: ShapeEstimate | None
    par_table: dict
    sectors: dict
    strongest: list
    amr_table: dict | None = None
    ref_alpha_max: float | None = None
    ellipse_scale: float = 2.0
    n_sectors: int = 36
    truth: GroundTruth | None = field(default=None, repr=False)

    @property
    def alpha_max(self) -> float:
        return float(np.max(np.abs(self.calibration.alpha_hat)))

    def series(self):
        """Magnitude series keyed ``LOS``, ``SP1`` ... ``SPJ`` (estimation order)."""
        cal = self.calibration
        out = {"LOS": MagnitudeSeries.of(cal.alpha_hat, self.aoas)}
        for j in range(cal.n_points):
            out[f"SP{j + 1}"] = MagnitudeSeries.of(cal.beta_hat[:, j], self.aoas)
        return out


def strongest_indices(beta_bar, count=2):
    """Indices by descending average magnitude, ties to the lower index."""
    order = sorted(range(len(beta_bar)), key=lambda j: (-beta_bar[j], j))
    return order[:count]


def _par_or_none(series):
    if np.all(series.values == 0):
        return None
    return par(series)


def amr_table(report: CampaignReport, reference: CampaignReport) -> dict:
    """AMR of every series of ``report`` against the reference maximum LOS magnitude."""
    if reference.label != "0":
        raise MissingReferenceError(f"reference report has label {reference.label!r}, expected '0'")
    ref_max = reference.alpha_max
    return {key: amr(avg_magnitude(s), ref_max) for key, s in report.series().items()}


def attach_reference(report: CampaignReport, reference: CampaignReport) -> CampaignReport:
    report.amr_table = amr_table(report, reference)
    report.ref_alpha_max = reference.alpha_max
    return report


def build_report(
    label, calibration: CalibrationResult, aoas, n_sectors=36, ellipse_scale=2.0, truth=None
) -> CampaignReport:
    aoas = np.asarray(aoas, dtype=float)
    alpha_series = MagnitudeSeries.of(calibration.alpha_hat, aoas)
    J = calibration.n_points
    beta_bar = np.array(
        [avg_magnitude(MagnitudeSeries.of(calibration.beta_hat[:, j], aoas)) for j in range(J)]
    )
    shape = shape_estimate(calibration.q_hat) if J else None
    report = CampaignReport(
        label=label,
        calibration=calibration,
        aoas=aoas,
        alpha_bar=avg_magnitude(alpha_series),
        beta_bar=beta_bar,
        shape=shape,
        par_table={},
        sectors={},
        strongest=strongest_indices(beta_bar),
        ellipse_scale=ellipse_scale,
        n_sectors=n_sectors,
        truth=truth,
    )
    series = report.series()
    report.par_table = {key: _par_or_none(s) for key, s in series.items()}
    sectors: dict[str, SectorStats] = {"LOS": sector_average(alpha_series, n_sectors)}
    for rank, j in enumerate(report.strongest, start=1):
        sectors[f"strongest_{rank}"] = sector_average(series[f"SP{j + 1}"], n_sectors)
    report.sectors = sectors
    return report


def run_calibration(
    snapshots: SnapshotSet,
    config: CampaignConfig,
    reference: CampaignReport | None = None,
    noise_variance=None,
    truth: GroundTruth | None = None,
) -> CampaignReport:
    """Calibrate, estimate the shape and compute all magnitude metrics.

    AMR needs the maximum LOS magnitude of a reference (label 0) campaign: it
    is computed against ``reference`` when given, or against the report
    itself when this campaign is the reference.
    """
    if noise_variance is None and config.snr_db is None and config.noise.variance > 0:
        noise_variance = config.noise.variance
    cal = calibrate(snapshots, config.grid, config.stopping, noise_variance)
    report = build_report(
        config.on_body_label, cal, snapshots.aoas, config.n_sectors, config.ellipse_scale, truth
    )
    if reference is not None:
        attach_reference(report, reference)
    elif report.label == "0":
        attach_reference(report, report)
    return report
