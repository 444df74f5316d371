"""Baseband pulse, delayed/phase-rotated pulse vectors and snapshot synthesis.

Every received component is a copy of one band-limited pulse, delayed by its
propagation delay tau and rotated by the carrier phase exp(-2j*pi*f_c*tau).
Fractional delays are realised by evaluating the closed-form pulse at the
shifted sample instants, so synthesis and estimation share exactly the same
templates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DelayOverflowError
from .geometry import as_point, los_delay, scatter_delay


@dataclass(frozen=True)
class PulseSpec:
    """Pulse, carrier and sampling parameters.

    The pulse is a root-raised-cosine with two-sided bandwidth
    ``bandwidth_hz`` = (1 + rolloff) / T_symbol, truncated to
    ``span_symbols`` symbol periods on each side of its peak.
    """

    carrier_hz: float = 6.95e9
    sample_rate_hz: float = 12.8e9
    n_samples: int = 512
    bandwidth_hz: float = 6.4e9
    rolloff: float = 0.6
    span_symbols: float = 6.0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.sample_rate_hz < self.bandwidth_hz:
            raise ValueError("sample_rate_hz must cover the two-sided pulse bandwidth")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError("rolloff must lie in [0, 1]")
        if self.span_symbols <= 0:
            raise ValueError("span_symbols must be positive")

    @property
    def sample_period(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def obs_window(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def symbol_period(self) -> float:
        return (1.0 + self.rolloff) / self.bandwidth_hz

    @property
    def support(self) -> float:
        """Half-width of the truncated pulse in seconds."""
        return self.span_symbols * self.symbol_period

    @cached_property
    def n_taps(self) -> int:
        return int(math.floor(2 * self.support * self.sample_rate_hz)) + 2

    @cached_property
    def amplitude_scale(self) -> float:
        """Factor giving the sampled pulse (zero delay) unit energy."""
        k = np.arange(-self.n_taps, self.n_taps + 1)
        g = rrc(k * self.sample_period, self.symbol_period, self.rolloff, self.span_symbols)
        return 1.0 / math.sqrt(float(np.sum(g * g)))


@dataclass(frozen=True)
class NoiseSpec:
    variance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be nonnegative")


def rrc(t, symbol_period, rolloff, span_symbols=math.inf):
    """Root-raised-cosine pulse normalised to unit peak at t = 0."""
    x = np.asarray(t, dtype=float) / symbol_period
    b = rolloff
    peak = 1.0 - b + 4.0 * b / math.pi
    out = np.empty_like(x)

    at_zero = np.abs(x) < 1e-12
    if b > 0:
        at_pole = np.abs(1.0 - (4.0 * b * x) ** 2) < 1e-9
    else:
        at_pole = np.zeros_like(at_zero)
    regular = ~(at_zero | at_pole)

    xr = x[regular]
    num = np.sin(np.pi * xr * (1.0 - b)) + 4.0 * b * xr * np.cos(np.pi * xr * (1.0 + b))
    den = np.pi * xr * (1.0 - (4.0 * b * xr) ** 2)
    out[regular] = num / den
    out[at_zero] = peak
    if b > 0:
        arg = math.pi / (4.0 * b)
        out[at_pole] = (b / math.sqrt(2.0)) * (
            (1.0 + 2.0 / math.pi) * math.sin(arg) + (1.0 - 2.0 / math.pi) * math.cos(arg)
        )
    out /= peak
    out[np.abs(x) > span_symbols] = 0.0
    if out.ndim == 0:
        return float(out)
    return out


def baseband_pulse(spec: PulseSpec, t):
    """Unit-peak pulse value(s) at time(s) ``t``."""
    return rrc(t, spec.symbol_period, spec.rolloff, spec.span_symbols)


def pulse_taps(spec: PulseSpec, delays):
    """Sparse form of delayed, energy-scaled pulses.

    Returns ``(start, taps)`` where ``start`` has the shape of ``delays`` and
    ``taps`` has one extra trailing axis of length ``spec.n_taps``. The pulse
    delayed by ``delays[i]`` occupies samples ``start[i] + arange(n_taps)``;
    taps falling outside the observation window are zeroed. The carrier phase
    is not included.
    """
    tau = np.asarray(delays, dtype=float)
    ts = spec.sample_period
    start = np.ceil((tau - spec.support) / ts).astype(np.int64)
    k = start[..., None] + np.arange(spec.n_taps)
    taps = spec.amplitude_scale * baseband_pulse(spec, k * ts - tau[..., None])
    taps[(k < 0) | (k >= spec.n_samples)] = 0.0
    return start, taps


def carrier_phase(spec: PulseSpec, delays):
    return np.exp(-2j * np.pi * spec.carrier_hz * np.asarray(delays, dtype=float))


def delayed_vector(spec: PulseSpec, delay: float) -> np.ndarray:
    """Length-N samples s(kT_s - delay) * exp(-2j pi f_c delay)."""
    if delay > spec.obs_window:
        raise DelayOverflowError(
            f"delay {delay:.6e} s exceeds the observation window {spec.obs_window:.6e} s"
        )
    start, taps = pulse_taps(spec, np.array([delay]))
    out = np.zeros(spec.n_samples, dtype=complex)
    idx = start[0] + np.arange(spec.n_taps)
    keep = (idx >= 0) & (idx < spec.n_samples)
    out[idx[keep]] = taps[0, keep] * carrier_phase(spec, delay)
    return out


def los_vector(spec: PulseSpec, p, a) -> np.ndarray:
    """Direct-path template s(p) for agent ``p`` and anchor ``a``."""
    return delayed_vector(spec, los_delay(p, a))


def scatter_vector(spec: PulseSpec, p, q, a) -> np.ndarray:
    """Template s(p, q) of the path scattered at ``q``."""
    return delayed_vector(spec, scatter_delay(a, q, p))


def noise_generator(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, snapshot index)."""
    key = np.random.SeedSequence([int(seed), 0, int(index)])
    return np.random.Generator(np.random.Philox(key))


def complex_noise(spec: PulseSpec, noise: NoiseSpec, index: int = 0) -> np.ndarray:
    if noise.variance == 0:
        return np.zeros(spec.n_samples, dtype=complex)
    rng = noise_generator(noise.seed, index)
    z = rng.standard_normal((2, spec.n_samples))
    return math.sqrt(noise.variance / 2.0) * (z[0] + 1j * z[1])


def synthesize(spec: PulseSpec, p, a, alpha, scatterers, noise: NoiseSpec | None = None, index=0):
    """Received snapshot r = alpha s(p) + sum_j beta_j s(p, q_j) + n.

    ``scatterers`` is an iterable of ``(q, beta)`` pairs. ``index`` selects
    the noise stream so snapshots can be generated independently.
    """
    p, a = as_point(p), as_point(a)
    r = complex(alpha) * los_vector(spec, p, a)
    for q, beta in scatterers:
        r = r + complex(beta) * scatter_vector(spec, p, q, a)
    if noise is not None:
        r = r + complex_noise(spec, noise, index)
    return r
