import numpy as np
import pytest

from eacal.errors import DimensionMismatchError, ZeroTemplateError
from eacal.estimator import (
    GridSpec,
    Snapshot,
    SnapshotSet,
    StoppingRule,
    TemplateBank,
    calibrate,
    joint_loglik,
    los_templates,
    ls_amplitude,
    ls_mark,
    residual,
    scatter_templates,
    score_candidate,
)
from eacal.waveform import NoiseSpec, PulseSpec, complex_noise, synthesize

GRID = GridSpec.centered((0.0, 0.0), 0.4, 0.04)


def make_snapshots(spec, anchors, points=(), marks=None, alpha=None, noise=None, p=(0.0, 0.0)):
    M = len(anchors)
    alpha = np.ones(M, dtype=complex) if alpha is None else alpha
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    marks = np.zeros((M, 0)) if marks is None else marks
    signals = np.array(
        [
            synthesize(spec, p, a, alpha[m], zip(points, marks[m]), noise, m)
            for m, a in enumerate(anchors.positions)
        ]
    )
    return SnapshotSet(signals, anchors.positions, anchors.aoas, p, spec)


def random_vector(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


# -- least squares -----------------------------------------------------------


def test_ls_amplitude_examples(rng):
    s = random_vector(rng, 64)
    a = 2 * np.exp(1j * np.pi / 4)
    assert ls_amplitude(a * s, s) == pytest.approx(a, rel=1e-14)
    u = random_vector(rng, 64)
    u -= np.vdot(s, u) / np.vdot(s, s) * s
    assert abs(ls_amplitude(u, s)) < 1e-15 * np.linalg.norm(u) / np.linalg.norm(s) * 64


def test_ls_mark_recovers_with_gram_schmidt_orthogonal_part(rng):
    s = random_vector(rng, 128)
    beta = 0.3 - 0.7j
    assert ls_mark(beta * s, s) == pytest.approx(beta, rel=1e-14)
    w = random_vector(rng, 128)
    w = w - (np.vdot(s, w) / np.vdot(s, s)) * s
    assert abs(np.vdot(s, w)) < 1e-12 * np.linalg.norm(s) * np.linalg.norm(w)
    assert ls_mark(beta * s + w, s) == pytest.approx(beta, rel=1e-12)
    assert abs(ls_mark(w, s)) < 1e-12


def test_ls_zero_template_raises():
    with pytest.raises(ZeroTemplateError):
        ls_amplitude(np.ones(4), np.zeros(4))


def test_ls_residual_orthogonal(rng):
    s, r = random_vector(rng, 200), random_vector(rng, 200)
    res = r - ls_amplitude(r, s) * s
    assert abs(np.vdot(s, res)) < 1e-9 * np.linalg.norm(r) * np.linalg.norm(s)
    # idempotent re-fit
    assert abs(ls_mark(res, s)) < 1e-12


# -- residual and likelihood ---------------------------------------------------


def test_residual_examples(small_spec, anchors32):
    p, a, q = (0.0, 0.0), anchors32.positions[5], (0.12, -0.08)
    s_p = los_templates(make_snapshots(small_spec, anchors32))[5]
    assert np.all(residual(0.8j * s_p, s_p, 0.8j) == 0)
    snaps = make_snapshots(
        small_spec, anchors32, [q], marks=np.full((32, 1), 0.2 - 0.1j), alpha=np.full(32, 0.9)
    )
    s_q = scatter_templates(snaps, q)[5]
    r = snaps.signals[5]
    full = residual(r, s_p, 0.9, [s_q], [0.2 - 0.1j])
    assert np.linalg.norm(full) <= 1e-9 * np.linalg.norm(r)
    np.testing.assert_allclose(residual(r, s_p, 0.9), (0.2 - 0.1j) * s_q, atol=1e-15)
    np.testing.assert_array_equal(s_p, synthesize(small_spec, p, a, 1.0, []))


def test_joint_loglik_examples(small_spec, anchors32, rng):
    q = np.array([[0.1, 0.2]])
    beta = (0.1 * random_vector(rng, 32)).reshape(32, 1)
    alpha = 1 + 0.1 * random_vector(rng, 32)
    snaps = make_snapshots(small_spec, anchors32, q, beta, alpha)
    assert joint_loglik(snaps, alpha, q, beta, 0.5) == pytest.approx(0.0, abs=1e-20)
    total = np.sum(np.abs(snaps.signals) ** 2)
    assert joint_loglik(snaps, np.zeros(32), np.empty((0, 2)), np.zeros((32, 0)), 0.5) == pytest.approx(
        -total / 0.5, rel=1e-14
    )
    a_hat = alpha + 0.05
    per = []
    for m in range(32):
        one = SnapshotSet(snaps.signals[m : m + 1], snaps.anchors[m : m + 1], snaps.aoas[m : m + 1], (0, 0), small_spec)
        per.append(joint_loglik(one, a_hat[m : m + 1], q, beta[m : m + 1], 0.5))
    assert joint_loglik(snaps, a_hat, q, beta, 0.5) == pytest.approx(sum(per), rel=1e-12)
    with pytest.raises(ValueError):
        joint_loglik(snaps, alpha, q, beta, 0.0)


# -- scoring ---------------------------------------------------------------------


def test_score_examples(small_spec, anchors32, rng):
    snaps = make_snapshots(small_spec, anchors32)
    nodes = GRID.nodes()
    assert score_candidate(nodes[10], np.zeros_like(snaps.signals), snaps) == 0.0
    q0 = nodes[137]
    marks = 0.3 * random_vector(rng, 32)
    S = scatter_templates(snaps, q0)
    res = marks[:, None] * S
    expected = float(np.sum(np.sum(np.abs(S) ** 2, axis=1) * np.abs(marks) ** 2))
    best = score_candidate(q0, res, snaps)
    assert best == pytest.approx(expected, rel=1e-12)
    others = [score_candidate(q, res, snaps) for i, q in enumerate(nodes) if i != 137]
    assert best > max(others)
    # invariant to a global phase rotation
    assert score_candidate(q0, res * np.exp(0.7j), snaps) == pytest.approx(best, rel=1e-12)


def test_template_bank_matches_dense_scores(small_spec, anchors32, rng):
    snaps = make_snapshots(small_spec, anchors32, noise=NoiseSpec(1e-3, 5))
    nodes = GRID.nodes()
    res = snaps.signals - los_templates(snaps)
    bank = TemplateBank(snaps, nodes, chunk=50_000)
    assert len(list(bank._slices())) > 1
    fast = bank.scores(res)
    dense = np.array([score_candidate(q, res, snaps) for q in nodes])
    ok = np.isfinite(fast)
    np.testing.assert_allclose(fast[ok], dense[ok], rtol=1e-10)
    uncached = TemplateBank(snaps, nodes, max_cache=0).scores(res)
    np.testing.assert_array_equal(uncached, fast)


def test_template_bank_excludes_los_collinear_and_out_of_window(small_spec, anchors32):
    snaps = make_snapshots(small_spec, anchors32)
    far = [[0.0, 0.0], [0.001, 0.0], [0.3, 0.1], [40.0, 0.0]]
    bank = TemplateBank(snaps, far)
    assert bank.valid.tolist() == [False, False, True, False]
    assert bank.n_out_of_window == 1
    assert bank.n_collinear == 2


def test_grid_nodes_order_and_ties():
    g = GridSpec((0.0, 0.08), (1.0, 1.04), 0.04)
    np.testing.assert_allclose(g.nodes(), [[0, 1], [0.04, 1], [0.08, 1], [0, 1.04], [0.04, 1.04], [0.08, 1.04]])
    with pytest.raises(ValueError):
        GridSpec((0, 1), (0, 1), 0.0)


# -- calibration -----------------------------------------------------------------


def test_calibrate_los_only_noise_free(small_spec, anchors32, rng):
    alpha = 0.5 + random_vector(rng, 32) * 0.2
    snaps = make_snapshots(small_spec, anchors32, alpha=alpha)
    cal = calibrate(snaps, GRID, noise_variance=0.0)
    assert cal.n_points == 0
    np.testing.assert_allclose(cal.alpha_hat, alpha, rtol=1e-9)
    # zero up to rounding of the residual (the likelihood is scaled by the variance floor)
    assert len(cal.loglik_trace) == 1
    assert cal.loglik_trace[0] == pytest.approx(0.0, abs=1e-9)


def exhaustive_single_point(snaps, nodes):
    """Oracle: best single node by brute-force LS over the LOS-removed residual."""
    R = snaps.signals
    S_p = los_templates(snaps)
    res = np.array([R[m] - ls_amplitude(R[m], S_p[m]) * S_p[m] for m in range(len(R))])
    best, best_q, best_b = -np.inf, None, None
    for q in nodes:
        S = scatter_templates(snaps, q)
        b = np.array([ls_mark(res[m], S[m]) for m in range(len(R))])
        gain = np.sum(np.abs(res) ** 2) - np.sum(np.abs(res - b[:, None] * S) ** 2)
        if gain > best:
            best, best_q, best_b = gain, q, b
    return best_q, best_b


def test_calibrate_single_on_grid_scatterer(small_spec, anchors32, rng):
    nodes = GRID.nodes()
    q = nodes[np.argmin(np.hypot(nodes[:, 0] - 0.2, nodes[:, 1] - 0.12))]
    beta = 0.2 * np.exp(1j * rng.uniform(0, 2 * np.pi, 32))
    alpha = np.exp(1j * rng.uniform(0, 2 * np.pi, 32))
    snaps = make_snapshots(small_spec, anchors32, [q], beta[:, None], alpha)
    cal = calibrate(snaps, GRID, noise_variance=0.0)
    assert cal.n_points >= 1
    assert np.array_equal(cal.q_hat[0], q)

    oracle_q, oracle_b = exhaustive_single_point(snaps, nodes[::7].tolist() + [q])
    assert np.array_equal(oracle_q, q)
    np.testing.assert_allclose(cal.beta_hat[:, 0], oracle_b, rtol=1e-6)

    # The LOS-first fit absorbs the part of the scatter template that is
    # collinear with the LOS template: beta_hat = beta (1 - |rho|^2).
    S_p, S_q = los_templates(snaps), scatter_templates(snaps, q)
    rho = np.einsum("mk,mk->m", S_p.conj(), S_q) / np.sum(np.abs(S_p) ** 2, axis=1)
    leak = np.abs(rho) ** 2 * np.sum(np.abs(S_p) ** 2, axis=1) / np.sum(np.abs(S_q) ** 2, axis=1)
    np.testing.assert_allclose(cal.beta_hat[:, 0], beta * (1 - leak), rtol=1e-6)


def test_calibrate_refine_recovers_marks_without_ghosts(small_spec, anchors32, rng):
    nodes = GRID.nodes()
    q = nodes[np.argmin(np.hypot(nodes[:, 0] - 0.2, nodes[:, 1] - 0.12))]
    beta = 0.2 * np.exp(1j * rng.uniform(0, 2 * np.pi, 32))
    snaps = make_snapshots(small_spec, anchors32, [q], beta[:, None])
    cal = calibrate(snaps, GRID, StoppingRule(max_points=1, refine=True), noise_variance=0.0)
    np.testing.assert_allclose(cal.beta_hat[:, 0], beta, rtol=1e-6)
    np.testing.assert_allclose(cal.alpha_hat, 1.0, rtol=1e-6)
    assert cal.refined_loglik >= cal.loglik_trace[-1]


def test_calibrate_trace_and_residual_orthogonality(small_spec, anchors32, rng):
    pts = np.array([[0.15, 0.1], [-0.2, -0.05]])
    marks = 0.2 * (random_vector(rng, 64).reshape(32, 2))
    snaps = make_snapshots(small_spec, anchors32, pts, marks, noise=NoiseSpec(1e-4, 3))
    cal = calibrate(snaps, GRID, noise_variance=1e-4)
    assert cal.n_points >= 2
    for j in range(cal.n_points):
        ll = joint_loglik(snaps, cal.alpha_hat, cal.q_hat[: j + 1], cal.beta_hat[:, : j + 1], 1e-4)
        assert ll == pytest.approx(cal.loglik_trace[j + 1], rel=1e-9)
        assert cal.scores[j] > StoppingRule().threshold(32, 1e-4)
    # the final residual is orthogonal to the last accepted template
    S = scatter_templates(snaps, cal.q_hat[-1])
    res = snaps.signals - cal.alpha_hat[:, None] * los_templates(snaps)
    for j in range(cal.n_points):
        res = res - cal.beta_hat[:, j, None] * scatter_templates(snaps, cal.q_hat[j])
    for m in range(32):
        assert abs(ls_mark(res[m], S[m])) < 1e-12


def test_calibrate_estimates_noise_variance(small_spec, anchors32):
    snaps = make_snapshots(small_spec, anchors32, noise=NoiseSpec(2e-3, 9))
    cal = calibrate(snaps, GRID)
    assert cal.noise_variance == pytest.approx(2e-3, rel=0.1)
    assert cal.n_points == 0


def test_calibrate_translation_equivariance(small_spec, anchors32, rng):
    pts = np.array([[0.16, 0.08]])
    marks = 0.2 * random_vector(rng, 32)[:, None]
    snaps = make_snapshots(small_spec, anchors32, pts, marks, noise=NoiseSpec(1e-4, 1))
    shift = np.array([3.0, -2.0])
    moved = SnapshotSet(snaps.signals, snaps.anchors + shift, snaps.aoas, tuple(shift), small_spec)
    grid = GridSpec.centered(tuple(shift), 0.4, 0.04)
    a = calibrate(snaps, GRID, noise_variance=1e-4)
    b = calibrate(moved, grid, noise_variance=1e-4)
    assert a.n_points == b.n_points
    np.testing.assert_allclose(b.q_hat - shift, a.q_hat, atol=1e-9)
    np.testing.assert_allclose(b.alpha_hat, a.alpha_hat, rtol=1e-6)
    np.testing.assert_allclose(b.beta_hat, a.beta_hat, rtol=1e-5, atol=1e-9)


def test_snapshot_set_validation(small_spec, anchors32):
    with pytest.raises(DimensionMismatchError):
        SnapshotSet(np.zeros((32, 100)), anchors32.positions, anchors32.aoas, (0, 0), small_spec)
    with pytest.raises(DimensionMismatchError):
        SnapshotSet(np.zeros((31, 256)), anchors32.positions, anchors32.aoas, (0, 0), small_spec)
    snaps = make_snapshots(small_spec, anchors32)
    rebuilt = SnapshotSet.from_records([snaps[m] for m in range(32)], (0, 0), small_spec)
    np.testing.assert_array_equal(rebuilt.signals, snaps.signals)
    assert isinstance(snaps[0], Snapshot)


def test_calibrate_deterministic(small_spec, anchors32):
    spec = PulseSpec(n_samples=256)
    snaps = make_snapshots(spec, anchors32, [[0.1, 0.1]], np.full((32, 1), 0.1), noise=NoiseSpec(1e-3, 2))
    a = calibrate(snaps, GRID)
    b = calibrate(snaps, GRID)
    np.testing.assert_array_equal(a.q_hat, b.q_hat)
    np.testing.assert_array_equal(a.beta_hat, b.beta_hat)
    assert a.loglik_trace == b.loglik_trace
    assert complex_noise(spec, NoiseSpec(1e-3, 2), 0).shape == (256,)
