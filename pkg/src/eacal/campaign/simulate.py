"""Synthetic campaigns in the reversed geometry: the agent (and body) stay
fixed while M anchors sit on a circle around it."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..ea_model import generate_marks, los_gain, sample_mppp
from ..estimator import SnapshotSet
from ..geometry import synthetic_circle_anchors
from ..waveform import NoiseSpec, complex_noise, synthesize
from .config import CampaignConfig


@dataclass
class GroundTruth:
    points: np.ndarray  # (J, 2)
    marks: np.ndarray  # (M, J)
    alpha: np.ndarray  # (M,)
    noise_variance: float
    label: str
    seed: int


def noise_variance_for_snr(clean: np.ndarray, snr_db: float) -> float:
    """Per-sample noise variance giving the requested SNR.

    The SNR is the mean noise-free power per sample (over all snapshots and
    the whole observation window) divided by the noise variance.
    """
    power = float(np.mean(np.abs(clean) ** 2))
    return power / 10.0 ** (snr_db / 10.0)


def run_simulation(config: CampaignConfig):
    """Sample the extended antenna and synthesise all M snapshots.

    Returns ``(snapshots, truth)``.
    """
    anchors = synthetic_circle_anchors(config.frame, config.anchor_radius, config.n_snapshots)
    ea = config.ea
    points = sample_mppp(ea, config.seed)
    marks = generate_marks(
        ea.marks, points, anchors.aoas, config.seed, center=ea.mu, heading=config.frame.heading
    )
    alpha = np.atleast_1d(los_gain(ea.los_gain, anchors.aoas))
    p = config.frame.origin

    clean = np.array(
        [
            synthesize(config.pulse, p, a, alpha[m], zip(points, marks[m]))
            for m, a in enumerate(anchors.positions)
        ]
    ).reshape(config.n_snapshots, config.pulse.n_samples)
    noise = config.noise
    if config.snr_db is not None:
        noise = replace(noise, variance=noise_variance_for_snr(clean, config.snr_db))
    noise = NoiseSpec(noise.variance, config.seed)
    signals = clean + np.array(
        [complex_noise(config.pulse, noise, m) for m in range(config.n_snapshots)]
    ).reshape(clean.shape)
    snapshots = SnapshotSet(signals, anchors.positions, anchors.aoas, p, config.pulse)
    truth = GroundTruth(points, marks, alpha, noise.variance, config.on_body_label, config.seed)
    return snapshots, truth
