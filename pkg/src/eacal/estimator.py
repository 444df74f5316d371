"""Greedy maximum-likelihood calibration of scattering points.

The LOS amplitude of every snapshot is fitted first by least squares. Then
scattering points are added one at a time: the grid node whose templates
explain most residual energy (summed over all snapshots, with per-snapshot
least-squares marks) is accepted, its contribution is subtracted, and the
search repeats while the joint log-likelihood gain clears the threshold.
Accepted points are never revisited.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DelayOverflowError, DimensionMismatchError, ZeroTemplateError
from .geometry import Point2, as_point, as_xy, los_delays, scatter_delays
from .waveform import PulseSpec, carrier_phase, pulse_taps

log = logging.getLogger(__name__)

# Relative floor on the noise variance (noise-free data would otherwise
# give an unbounded likelihood and accept numerical dust).
VARIANCE_FLOOR = 1e-12


class Snapshot:
    """One received record: signal r_m, anchor position a_m and AOA phi_m."""

    __slots__ = ("signal", "anchor", "aoa")

    def __init__(self, signal, anchor, aoa):
        self.signal = np.asarray(signal, dtype=complex)
        self.anchor = as_point(anchor)
        self.aoa = float(aoa)


@dataclass(frozen=True)
class SnapshotSet:
    signals: np.ndarray  # (M, N) complex
    anchors: np.ndarray  # (M, 2)
    aoas: np.ndarray  # (M,)
    agent: Point2
    spec: PulseSpec

    def __post_init__(self):
        signals = np.asarray(self.signals, dtype=complex)
        if signals.ndim != 2 or signals.shape[0] < 1:
            raise DimensionMismatchError("signals must be a non-empty (M, N) array")
        if signals.shape[1] != self.spec.n_samples:
            raise DimensionMismatchError(
                f"signals have {signals.shape[1]} samples, pulse spec expects {self.spec.n_samples}"
            )
        anchors = as_xy(self.anchors)
        aoas = np.asarray(self.aoas, dtype=float).reshape(-1)
        if len(anchors) != len(signals) or len(aoas) != len(signals):
            raise DimensionMismatchError(
                f"{len(signals)} signals, {len(anchors)} anchors, {len(aoas)} aoas"
            )
        object.__setattr__(self, "signals", signals)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "aoas", aoas)
        object.__setattr__(self, "agent", as_point(self.agent))

    @classmethod
    def from_records(cls, records, agent, spec):
        records = list(records)
        return cls(
            np.array([r.signal for r in records]),
            np.array([tuple(r.anchor) for r in records]),
            np.array([r.aoa for r in records]),
            agent,
            spec,
        )

    def __len__(self):
        return len(self.signals)

    def __getitem__(self, m) -> Snapshot:
        return Snapshot(self.signals[m], self.anchors[m], self.aoas[m])


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple
    y_range: tuple
    step: float

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("grid step must be positive")
        for lo, hi in (self.x_range, self.y_range):
            if hi < lo:
                raise ValueError("grid ranges must be non-empty")

    @classmethod
    def centered(cls, center, half_width, step):
        c = as_point(center)
        return cls((c.x - half_width, c.x + half_width), (c.y - half_width, c.y + half_width), step)

    def axis(self, lo, hi) -> np.ndarray:
        n = int(math.floor((hi - lo) / self.step + 1e-9)) + 1
        return lo + self.step * np.arange(n)

    def nodes(self) -> np.ndarray:
        """Candidate positions, y-major so the first maximum is the lowest (y, x)."""
        xs = self.axis(*self.x_range)
        ys = self.axis(*self.y_range)
        yy, xx = np.meshgrid(ys, xs, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class StoppingRule:
    """Accept a candidate while its gain exceeds ``gamma * M * sigma_w^2``."""

    gamma: float = 3.0
    max_points: int = 16
    refine: bool = False

    def threshold(self, n_snapshots, noise_variance):
        return self.gamma * n_snapshots * noise_variance


@dataclass
class CalibrationResult:
    q_hat: np.ndarray  # (J, 2)
    alpha_hat: np.ndarray  # (M,)
    beta_hat: np.ndarray  # (M, J)
    loglik_trace: list
    noise_variance: float
    scores: list = field(default_factory=list)
    n_skipped: int = 0
    refined_loglik: float | None = None

    @property
    def n_points(self) -> int:
        return len(self.q_hat)


def _projection(r, s):
    r = np.asarray(r, dtype=complex)
    s = np.asarray(s, dtype=complex)
    energy = np.vdot(s, s).real
    if energy == 0:
        raise ZeroTemplateError("template has zero energy")
    return complex(np.vdot(s, r) / energy)


def ls_amplitude(r_m, s_p) -> complex:
    """Least-squares LOS amplitude s^H r / s^H s."""
    return _projection(r_m, s_p)


def ls_mark(residual_m, s_pq) -> complex:
    """Least-squares scattering coefficient for one template."""
    return _projection(residual_m, s_pq)


def residual(r_m, s_p, alpha_m, scatter_templates=(), marks_m=()):
    out = np.asarray(r_m, dtype=complex) - alpha_m * np.asarray(s_p, dtype=complex)
    for s, b in zip(scatter_templates, marks_m):
        out = out - b * np.asarray(s, dtype=complex)
    return out


def _dense(spec: PulseSpec, start, taps, phase):
    """Expand sparse taps (M rows) into an (M, N) complex template matrix."""
    m = len(start)
    out = np.zeros((m, spec.n_samples), dtype=complex)
    idx = start[:, None] + np.arange(spec.n_taps)
    keep = (idx >= 0) & (idx < spec.n_samples)
    rows = np.broadcast_to(np.arange(m)[:, None], idx.shape)
    out[rows[keep], idx[keep]] = (taps * phase[:, None])[keep]
    return out


def los_templates(snapshots: SnapshotSet) -> np.ndarray:
    """s(p_t) for every anchor, shape (M, N)."""
    spec = snapshots.spec
    tau = los_delays(snapshots.anchors, snapshots.agent)
    _check_window(spec, tau)
    start, taps = pulse_taps(spec, tau)
    return _dense(spec, start, taps, carrier_phase(spec, tau))


def scatter_templates(snapshots: SnapshotSet, q) -> np.ndarray:
    """s(p_t, q) for every anchor, shape (M, N)."""
    spec = snapshots.spec
    tau = scatter_delays(snapshots.anchors, as_point(q).xy, snapshots.agent)[0]
    _check_window(spec, tau)
    start, taps = pulse_taps(spec, tau)
    return _dense(spec, start, taps, carrier_phase(spec, tau))


def _check_window(spec, tau):
    if np.any(tau > spec.obs_window):
        raise DelayOverflowError(
            f"delay {tau.max():.6e} s exceeds the observation window {spec.obs_window:.6e} s"
        )


def joint_loglik(snapshots: SnapshotSet, alpha_hat, q_hat, beta_hat, noise_variance) -> float:
    """Joint log-likelihood up to an additive constant.

    ``-(1/sigma^2) * sum_m ||r_m - alpha_m s(p_t) - S(p_t, Q) beta_m||^2``.
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    res = snapshots.signals - np.asarray(alpha_hat)[:, None] * los_templates(snapshots)
    beta_hat = np.asarray(beta_hat, dtype=complex).reshape(len(snapshots), -1)
    for j, q in enumerate(as_xy(q_hat)):
        res = res - beta_hat[:, j, None] * scatter_templates(snapshots, q)
    return -float(np.sum(np.abs(res) ** 2)) / noise_variance


def score_candidate(q, residuals, snapshots: SnapshotSet) -> float:
    """Residual energy removed by adding ``q`` with per-snapshot LS marks.

    Equals ``sum_m |s(p_t,q)^H r_m|^2 / ||s(p_t,q)||^2``; dividing by the noise
    variance gives the joint log-likelihood gain.
    """
    S = scatter_templates(snapshots, q)
    R = np.asarray(residuals, dtype=complex)
    ip = np.einsum("mk,mk->m", S.conj(), R)
    nrm = np.einsum("mk,mk->m", S.conj(), S).real
    if np.any(nrm == 0):
        raise ZeroTemplateError("scatter template has zero energy")
    return float(np.sum(np.abs(ip) ** 2 / nrm))


def estimate_noise_variance(snapshots: SnapshotSet, tail_fraction=0.25) -> float:
    """Noise variance from the late part of the LOS-removed residual.

    Uses the median of |n|^2, which for circular complex Gaussian noise is
    sigma^2 * ln 2.
    """
    S = los_templates(snapshots)
    R = snapshots.signals
    alpha = np.einsum("mk,mk->m", S.conj(), R) / np.einsum("mk,mk->m", S.conj(), S).real
    res = R - alpha[:, None] * S
    n0 = int(math.floor((1.0 - tail_fraction) * snapshots.spec.n_samples))
    tail = np.abs(res[:, n0:]) ** 2
    return float(np.median(tail)) / math.log(2.0)


class TemplateBank:
    """Scatter templates of all grid candidates as sparse matrix blocks.

    Row ``c * M + m`` of a block holds the taps of candidate ``c`` at anchor
    ``m`` against the flattened (M * N) residual, so scoring a pass over the
    grid is one sparse product per block. Blocks are cached when their total
    size fits in ``max_cache`` stored taps, otherwise rebuilt on each pass.
    """

    def __init__(self, snapshots: SnapshotSet, candidates, max_cache=80_000_000, chunk=4_000_000):
        self.snapshots = snapshots
        self.spec = snapshots.spec
        self.candidates = as_xy(candidates)
        M = len(snapshots)
        L = self.spec.n_taps
        self.delays = scatter_delays(snapshots.anchors, self.candidates, snapshots.agent)

        in_window = np.all(self.delays <= self.spec.obs_window, axis=1)
        tau_los = los_delays(snapshots.anchors, snapshots.agent)
        near_los = np.abs(self.delays - tau_los[None, :]) < self.spec.sample_period / 4
        collinear = np.mean(near_los, axis=1) > 0.9
        self.valid = in_window & ~collinear
        self.n_out_of_window = int(np.sum(~in_window))
        self.n_collinear = int(np.sum(collinear & in_window))

        self.chunk = max(1, chunk // (M * L))
        self.norms = np.zeros(self.delays.shape)
        cache = len(self.candidates) * M * L <= max_cache
        self._cache = [] if cache else None
        for sl in self._slices():
            block, norms = self._block(sl)
            self.norms[sl] = norms
            if cache:
                self._cache.append(block)
        self.valid &= ~np.any(self.norms == 0, axis=1)

    def _slices(self):
        n = len(self.candidates)
        for lo in range(0, n, self.chunk):
            yield slice(lo, min(n, lo + self.chunk))

    def _block(self, sl):
        spec = self.spec
        N, L = spec.n_samples, spec.n_taps
        start, taps = pulse_taps(spec, self.delays[sl])
        c, M = start.shape
        norms = np.einsum("cml,cml->cm", taps, taps)
        cols = np.clip(start[..., None] + np.arange(L), 0, N - 1)
        cols += (np.arange(M) * N)[None, :, None]
        block = sparse.csr_matrix(
            (taps.ravel(), cols.ravel(), np.arange(0, c * M * L + 1, L)), shape=(c * M, M * N)
        )
        return block, norms

    def scores(self, residuals) -> np.ndarray:
        """Gain of every candidate; invalid candidates get -inf."""
        M = len(self.snapshots)
        flat = np.asarray(residuals, dtype=complex).ravel()
        parts = np.column_stack([flat.real, flat.imag])
        out = np.full(len(self.candidates), -np.inf)
        for i, sl in enumerate(self._slices()):
            block = self._cache[i] if self._cache is not None else self._block(sl)[0]
            ip = block @ parts
            power = (ip[:, 0] ** 2 + ip[:, 1] ** 2).reshape(-1, M)
            out[sl] = np.sum(power / self.norms[sl], axis=1)
        out[~self.valid] = -np.inf
        return out


def _refine(snapshots, S_p, templates):
    """Joint per-snapshot LS of LOS and all scatter marks for fixed points."""
    M = len(snapshots)
    J = len(templates)
    alpha = np.empty(M, dtype=complex)
    beta = np.empty((M, J), dtype=complex)
    for m in range(M):
        basis = np.column_stack([S_p[m]] + [T[m] for T in templates])
        coef, *_ = np.linalg.lstsq(basis, snapshots.signals[m], rcond=None)
        alpha[m] = coef[0]
        beta[m] = coef[1:]
    return alpha, beta


def calibrate(
    snapshots: SnapshotSet,
    grid: GridSpec,
    stop: StoppingRule | None = None,
    noise_variance: float | None = None,
    bank: TemplateBank | None = None,
) -> CalibrationResult:
    """Greedy iterative ML estimate of scattering points, LOS amplitudes and marks.

    ``noise_variance=None`` estimates it from the data. A variance of zero
    (noise-free simulation) is lifted to a tiny floor relative to the mean
    sample power.
    """
    stop = stop or StoppingRule()
    M = len(snapshots)
    R = snapshots.signals
    if noise_variance is None:
        noise_variance = estimate_noise_variance(snapshots)
    floor = VARIANCE_FLOOR * float(np.mean(np.abs(R) ** 2))
    variance = max(float(noise_variance), floor)
    if variance <= 0:
        raise ValueError("all snapshots are identically zero")

    if bank is None:
        candidates = grid.nodes()
        if len(candidates) == 0:
            raise ValueError("empty grid")
        bank = TemplateBank(snapshots, candidates)
    if bank.n_out_of_window:
        log.warning("%d grid candidates outside the observation window skipped", bank.n_out_of_window)

    S_p = los_templates(snapshots)
    sp_energy = np.einsum("mk,mk->m", S_p.conj(), S_p).real
    if np.any(sp_energy == 0):
        raise ZeroTemplateError("LOS template has zero energy")
    alpha = np.einsum("mk,mk->m", S_p.conj(), R) / sp_energy
    res = R - alpha[:, None] * S_p

    threshold = stop.threshold(M, variance)
    trace = [-float(np.sum(np.abs(res) ** 2)) / variance]
    points, marks, scores, templates = [], [], [], []
    while len(points) < stop.max_points:
        gains = bank.scores(res)
        best = int(np.argmax(gains))
        if not np.isfinite(gains[best]):
            break
        q = bank.candidates[best]
        S = scatter_templates(snapshots, q)
        ip = np.einsum("mk,mk->m", S.conj(), res)
        nrm = np.einsum("mk,mk->m", S.conj(), S).real
        score = float(np.sum(np.abs(ip) ** 2 / nrm))
        if score <= threshold:
            break
        beta = ip / nrm
        res = res - beta[:, None] * S
        points.append(q.copy())
        marks.append(beta)
        scores.append(score)
        templates.append(S)
        trace.append(-float(np.sum(np.abs(res) ** 2)) / variance)
        log.debug("accepted point %d at (%.4f, %.4f), gain %.4g", len(points), q[0], q[1], score)

    q_hat = np.array(points).reshape(-1, 2)
    beta_hat = np.column_stack(marks) if marks else np.zeros((M, 0), dtype=complex)
    result = CalibrationResult(
        q_hat, alpha, beta_hat, trace, variance, scores, bank.n_out_of_window
    )
    if stop.refine and points:
        result.alpha_hat, result.beta_hat = _refine(snapshots, S_p, templates)
        result.refined_loglik = joint_loglik(
            snapshots, result.alpha_hat, q_hat, result.beta_hat, variance
        )
    return result
