import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eacal.ea_model import (
    ExtendedAntennaModel,
    GainSpec,
    MarkSpec,
    covariance_ellipse,
    generate_marks,
    los_gain,
    notch_profile,
    peak_directions,
    sample_mppp,
    shape_estimate,
)
from eacal.errors import EmptySetError

SIGMA = np.array([[0.01, 0.004], [0.004, 0.02]])


def model(mean_count=5.0, sigma=SIGMA, mu=(0.1, -0.2)):
    return ExtendedAntennaModel(mu=mu, sigma=sigma, mean_count=mean_count)


def test_zero_mean_count_always_empty():
    for seed in range(50):
        assert sample_mppp(model(0.0), seed).shape == (0, 2)


def test_degenerate_covariance_collapses_to_mu():
    m = model(3.0, sigma=np.zeros((2, 2)))
    pts = np.concatenate([sample_mppp(m, seed) for seed in range(20)])
    assert len(pts) > 0
    np.testing.assert_array_equal(pts, np.broadcast_to(m.mu.xy, pts.shape))


def test_sampling_deterministic():
    np.testing.assert_array_equal(sample_mppp(model(), 11), sample_mppp(model(), 11))
    assert not np.array_equal(sample_mppp(model(20), 11), sample_mppp(model(20), 12))


def test_model_validation():
    with pytest.raises(ValueError):
        model(sigma=[[1, 0.5], [0.1, 1]])
    with pytest.raises(ValueError):
        model(sigma=[[1, 2], [2, 1]])
    with pytest.raises(ValueError):
        model(mean_count=-1)


def test_mark_flat_limit():
    aoas = np.linspace(-np.pi, np.pi, 50, endpoint=False)
    pts = np.array([[0.1, 0.0], [-0.1, 0.05], [0.0, -0.2]])
    wide = generate_marks(MarkSpec(0.05, 1e3), pts, aoas, 3)
    assert np.max(np.abs(np.abs(wide) - 0.05)) <= 1e-6
    # the absolute bound scales with base_magnitude; a unit base needs a wider law
    unit = generate_marks(MarkSpec(1.0, 1e4), pts, aoas, 3)
    assert np.max(np.abs(np.abs(unit) - 1.0)) <= 1e-6


def test_mark_zero_base():
    pts = np.array([[0.1, 0.0], [0.0, 0.3]])
    marks = generate_marks(MarkSpec(0.0, 0.5), pts, np.linspace(-3, 3, 9), 0)
    assert marks.shape == (9, 2)
    np.testing.assert_array_equal(marks, 0)


def test_marks_deterministic():
    pts = sample_mppp(model(8), 4)
    aoas = np.linspace(-3, 3, 13)
    a = generate_marks(MarkSpec(), pts, aoas, 4)
    np.testing.assert_array_equal(a, generate_marks(MarkSpec(), pts, aoas, 4))


def test_marks_peak_at_visibility_direction():
    pts = np.array([[0.0, 0.2]])  # visible best from +90 degrees
    aoas = np.linspace(-np.pi, np.pi, 73)[1:]
    mag = np.abs(generate_marks(MarkSpec(0.1, 0.4, random_phase=False), pts, aoas, 0))[:, 0]
    assert aoas[np.argmax(mag)] == pytest.approx(math.pi / 2, abs=1e-12)
    assert mag.max() == pytest.approx(0.1)


def test_peak_directions_centre_point():
    d = peak_directions([[0.0, 0.0], [1.0, 1.0]], (0.0, 0.0), heading=0.0)
    assert d[0] == 0.0
    assert d[1] == pytest.approx(math.pi / 4)


def test_los_gain_examples():
    spec = GainSpec(max_gain=0.8, notch_direction=math.pi, notch_depth_db=20.0, notch_width=math.pi / 2)
    assert abs(los_gain(spec, math.pi)) == pytest.approx(0.8 * 10 ** (-1.0))
    assert abs(los_gain(spec, -math.pi)) == pytest.approx(0.08)
    assert los_gain(spec, 0.0) == 0.8
    assert los_gain(spec, math.pi / 2) == 0.8
    flat = GainSpec(max_gain=0.7, notch_depth_db=0.0)
    np.testing.assert_array_equal(los_gain(flat, np.linspace(-3, 3, 21)), 0.7)


@given(st.floats(-math.pi, math.pi))
def test_los_gain_bounded(phi):
    spec = GainSpec(max_gain=1.0, notch_depth_db=15.0)
    g = abs(los_gain(spec, phi))
    assert 10 ** (-0.75) - 1e-12 <= g <= 1.0
    assert 0.0 <= notch_profile(spec, phi) <= 1.0


def test_shape_estimate_examples():
    est = shape_estimate([[0.3, -0.4]])
    np.testing.assert_array_equal(est.mu, [0.3, -0.4])
    np.testing.assert_array_equal(est.sigma, np.zeros((2, 2)))
    est = shape_estimate([[1.0, 0.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(est.mu, [0.0, 0.0])
    np.testing.assert_array_equal(est.sigma, [[1.0, 0.0], [0.0, 0.0]])


def test_shape_estimate_empty_raises():
    with pytest.raises(EmptySetError):
        shape_estimate(np.empty((0, 2)))


def test_shape_estimate_law_of_large_numbers(rng):
    mu = np.array([0.2, -0.1])
    pts = rng.multivariate_normal(mu, SIGMA, size=10_000)
    est = shape_estimate(pts)
    assert np.linalg.norm(est.mu - mu) < 0.005
    assert np.linalg.norm(est.sigma - SIGMA) / np.linalg.norm(SIGMA) < 0.05


@settings(max_examples=25)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_shape_estimate_matches_numpy(n, seed):
    pts = np.random.default_rng(seed).normal(size=(n, 2))
    est = shape_estimate(pts)
    np.testing.assert_allclose(est.sigma, np.cov(pts.T, bias=True).reshape(2, 2), atol=1e-12)
    assert np.all(np.linalg.eigvalsh(est.sigma) >= -1e-15)


def test_covariance_ellipse_radii():
    sigma = np.diag([0.04, 0.01])
    ell = covariance_ellipse((1.0, 2.0), sigma, scale=2.0, n_points=5)
    d = ell - [1.0, 2.0]
    np.testing.assert_allclose(np.sort(np.hypot(*d.T))[[0, -1]], [0.2, 0.4], atol=1e-12)
    np.testing.assert_allclose(ell[0], ell[-1])
