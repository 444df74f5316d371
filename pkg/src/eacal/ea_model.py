"""Generative extended-antenna model and shape estimate.

An extended antenna is the agent antenna plus the nearby body, described by
a mean position, a 2x2 shape covariance and a marked Poisson point process
of scattering points. Points are drawn from a Gaussian intensity; their
complex marks depend on the angle of arrival of each snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EmptySetError
from .geometry import Point2, as_point, as_xy, wrap_angle


@dataclass(frozen=True)
class MarkSpec:
    """Angular law of the scattering-coefficient magnitudes.

    ``|beta_mj| = base_magnitude * exp(-d**2 / (2 angular_width**2))`` with
    ``d`` the wrapped difference between the snapshot AOA and the AOA of
    maximal visibility of scatterer j.
    """

    base_magnitude: float = 0.05
    angular_width: float = 0.6
    random_phase: bool = True

    def __post_init__(self):
        if self.base_magnitude < 0:
            raise ValueError("base_magnitude must be nonnegative")
        if self.angular_width <= 0:
            raise ValueError("angular_width must be positive")


@dataclass(frozen=True)
class GainSpec:
    """LOS gain with a raised-cosine notch (body shadowing)."""

    max_gain: float = 1.0
    notch_direction: float = math.pi
    notch_depth_db: float = 0.0
    notch_width: float = math.pi / 2

    def __post_init__(self):
        if self.max_gain <= 0:
            raise ValueError("max_gain must be positive")
        if self.notch_depth_db < 0:
            raise ValueError("notch_depth_db must be nonnegative")
        if self.notch_width <= 0:
            raise ValueError("notch_width must be positive")


@dataclass(frozen=True)
class ExtendedAntennaModel:
    mu: Point2
    sigma: np.ndarray
    mean_count: float
    marks: MarkSpec = field(default_factory=MarkSpec)
    los_gain: GainSpec = field(default_factory=GainSpec)

    def __post_init__(self):
        object.__setattr__(self, "mu", as_point(self.mu))
        sigma = np.array(self.sigma, dtype=float).reshape(2, 2)
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-15):
            raise ValueError("sigma must be symmetric")
        if np.linalg.eigvalsh(sigma).min() < -1e-15:
            raise ValueError("sigma must be positive semi-definite")
        if self.mean_count < 0:
            raise ValueError("mean_count must be nonnegative")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)


class ScattererSet(NamedTuple):
    points: np.ndarray  # (J, 2)
    marks: np.ndarray  # (M, J) complex


class ShapeEstimate(NamedTuple):
    mu: np.ndarray
    sigma: np.ndarray


def _rng(seed, stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), 1, stream]))


def sample_mppp(model: ExtendedAntennaModel, seed) -> np.ndarray:
    """Draw one realisation of the scattering-point process, shape (J, 2)."""
    rng = _rng(seed, 1)
    count = int(rng.poisson(model.mean_count))
    if count == 0:
        return np.empty((0, 2))
    # Eigen-factor so that zero-variance directions collapse exactly onto mu.
    lam, vec = np.linalg.eigh(model.sigma)
    factor = vec * np.sqrt(np.clip(lam, 0.0, None))
    z = rng.standard_normal((count, 2))
    return model.mu.xy + z @ factor.T


def peak_directions(points, center, heading: float = 0.0) -> np.ndarray:
    """AOA of maximal visibility per point: direction from ``center`` to the point.

    Points coinciding with the centre get the heading direction (AOA 0).
    """
    pts = as_xy(points)
    c = as_point(center)
    dx, dy = pts[:, 0] - c.x, pts[:, 1] - c.y
    out = wrap_angle(np.arctan2(dy, dx) - heading) if len(pts) else np.empty(0)
    out = np.atleast_1d(out)
    out[(dx == 0) & (dy == 0)] = 0.0
    return out


def generate_marks(
    spec: MarkSpec, points, aoas, seed, *, center=(0.0, 0.0), heading=0.0, peak_aoas=None
) -> np.ndarray:
    """Per-snapshot complex marks, shape (M, J).

    ``peak_aoas`` defaults to the direction from ``center`` (the model mean)
    to each point.
    """
    aoas = np.asarray(aoas, dtype=float).reshape(-1)
    if peak_aoas is None:
        peak_aoas = peak_directions(points, center, heading)
    peak_aoas = np.asarray(peak_aoas, dtype=float).reshape(-1)
    d = wrap_angle(aoas[:, None] - peak_aoas[None, :])
    mag = spec.base_magnitude * np.exp(-np.square(d) / (2.0 * spec.angular_width**2))
    if spec.random_phase:
        phase = _rng(seed, 2).uniform(0.0, 2 * np.pi, size=mag.shape)
        return mag * np.exp(1j * phase)
    return mag.astype(complex)


def notch_profile(spec: GainSpec, phi):
    """Raised-cosine bump: 1 at the notch centre, 0 outside the support."""
    d = np.abs(wrap_angle(np.asarray(phi, dtype=float) - spec.notch_direction))
    half = spec.notch_width / 2.0
    g = np.where(d < half, 0.5 * (1.0 + np.cos(np.pi * d / half)), 0.0)
    return g


def los_gain(spec: GainSpec, phi):
    """Complex LOS amplitude (zero phase) for AOA(s) ``phi``."""
    g = notch_profile(spec, phi)
    out = (spec.max_gain * 10.0 ** (-spec.notch_depth_db * g / 20.0)).astype(complex)
    if out.ndim == 0:
        return complex(out)
    return out


def shape_estimate(points) -> ShapeEstimate:
    """Sample mean and 1/J-normalised scatter matrix of the points."""
    pts = as_xy(points)
    if len(pts) == 0:
        raise EmptySetError("shape estimate needs at least one point")
    mu = pts.mean(axis=0)
    d = pts - mu
    sigma = d.T @ d / len(pts)
    return ShapeEstimate(mu, 0.5 * (sigma + sigma.T))


def covariance_ellipse(mu, sigma, scale=2.0, n_points=73) -> np.ndarray:
    """Closed polyline of the ``scale``-enlarged one-sigma ellipse, shape (n, 2)."""
    lam, vec = np.linalg.eigh(np.asarray(sigma, dtype=float))
    radii = scale * np.sqrt(np.clip(lam, 0.0, None))
    t = np.linspace(0.0, 2 * np.pi, n_points)
    circle = np.stack([radii[0] * np.cos(t), radii[1] * np.sin(t)])
    return np.asarray(mu, dtype=float) + (vec @ circle).T
