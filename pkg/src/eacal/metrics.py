"""Angular magnitude statistics: averages, AMR, PAR and sector averaging.

Ratios are reported in dB as ``20*log10`` of magnitude ratios, which equals
``10*log10`` of the corresponding squared-magnitude ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySetError
from .geometry import wrap_angle


@dataclass(frozen=True)
class MagnitudeSeries:
    values: np.ndarray
    aoas: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        aoas = np.asarray(self.aoas, dtype=float).reshape(-1)
        if len(values) != len(aoas):
            raise ValueError(f"{len(values)} values for {len(aoas)} aoas")
        if np.any(values < 0):
            raise ValueError("magnitudes must be nonnegative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "aoas", aoas)

    @classmethod
    def of(cls, amplitudes, aoas):
        return cls(np.abs(np.asarray(amplitudes)), aoas)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SectorStats:
    """Per-sector means; empty sectors have count 0 and mean NaN."""

    n_sectors: int
    centers: np.ndarray
    means: np.ndarray
    counts: np.ndarray
    squared: bool = True


def avg_magnitude(series: MagnitudeSeries) -> float:
    if len(series) == 0:
        raise EmptySetError("average of an empty series")
    return float(np.mean(series.values))


def amr(avg: float, ref_max: float) -> float:
    """Average magnitude ratio in dB against the reference maximum LOS magnitude."""
    if ref_max <= 0:
        raise ValueError("reference maximum must be positive")
    if avg < 0:
        raise ValueError("average magnitude must be nonnegative")
    if avg == 0:
        return -math.inf
    return 20.0 * math.log10(avg / ref_max)


def par(series: MagnitudeSeries) -> float:
    """Peak-to-average ratio in dB; 0 dB for a constant series."""
    if len(series) == 0:
        raise EmptySetError("peak-to-average ratio of an empty series")
    peak = float(np.max(series.values))
    if peak == 0:
        raise ValueError("peak-to-average ratio undefined for an all-zero series")
    # normalise by the peak first: exact 0 dB for constant series and no
    # underflow of the mean for tiny magnitudes
    ratio = min(float(np.mean(series.values / peak)), 1.0)
    if ratio == 1.0:
        return 0.0
    return -20.0 * math.log10(ratio)


def sector_index(aoas, n_sectors: int) -> np.ndarray:
    """Sector of each AOA.

    Sector k covers [-pi + k*w, -pi + (k+1)*w) with w = 2*pi/n_sectors; an
    AOA of exactly +pi (the wrapped form of 180 degrees) falls in the last
    sector.
    """
    w = 2 * np.pi / n_sectors
    shifted = np.asarray(wrap_angle(aoas), dtype=float) + np.pi
    return np.clip((shifted // w).astype(int), 0, n_sectors - 1)


def sector_centers(n_sectors: int) -> np.ndarray:
    w = 2 * np.pi / n_sectors
    return -np.pi + w * (np.arange(n_sectors) + 0.5)


def sector_average(series: MagnitudeSeries, n_sectors: int = 36, squared: bool = True) -> SectorStats:
    """Average (squared, by default) magnitudes inside uniform angular sectors."""
    if n_sectors < 1:
        raise ValueError("n_sectors must be >= 1")
    idx = sector_index(series.aoas, n_sectors)
    vals = series.values**2 if squared else series.values
    counts = np.bincount(idx, minlength=n_sectors)
    sums = np.bincount(idx, weights=vals, minlength=n_sectors)
    means = np.full(n_sectors, np.nan)
    nz = counts > 0
    means[nz] = sums[nz] / counts[nz]
    return SectorStats(n_sectors, sector_centers(n_sectors), means, counts, squared)
