import math

import numpy as np
import pytest
from scipy.stats import chisquare

from cfmobility.errors import ConfigurationError, ParameterError
from cfmobility.geometry import Rect
from cfmobility.mobility import Trajectory, generate_trajectory

BIG = Rect.square(400.0)


def _headings(n_traj, n_seg, window, scale=0.5, seed=0):
    out = []
    for i in range(n_traj):
        t = generate_trajectory(10.0, n_seg, scale, window,
                                np.random.default_rng([seed, i]))
        out.append(t.headings)
    return np.concatenate(out)


def test_mean_abs_sin_heading():
    # drives the (2/pi) factor of the cluster handover rate
    h = _headings(100, 1000, BIG, seed=1)
    assert np.abs(np.sin(h)).mean() == pytest.approx(2.0 / math.pi, abs=0.003)


def test_heading_uniformity_chi_square():
    h = _headings(100, 1000, BIG, seed=2)
    counts, _ = np.histogram(h, bins=16, range=(0.0, 2.0 * math.pi))
    assert chisquare(counts).pvalue > 0.01


def test_rayleigh_mean_length():
    scale = 0.5
    lengths = []
    for i in range(200):
        t = generate_trajectory(10.0, 50, scale, BIG,
                                np.random.default_rng([3, i]))
        lengths.append(t.lengths)
    mean = np.concatenate(lengths).mean()
    assert mean == pytest.approx(scale * math.sqrt(math.pi / 2.0), rel=0.01)


def test_total_time_unit_consistency():
    # 1 km of path at 10 m/s takes 100 s
    vertices = np.array([[0.0, 0.0], [0.6, 0.0], [0.6, 0.4]])
    t = Trajectory(vertices=vertices, headings=np.array([0.0, math.pi / 2]),
                   lengths=np.array([0.6, 0.4]), speed=10.0)
    assert t.total_time == pytest.approx(100.0)


def test_path_continuity_exact():
    t = generate_trajectory(10.0, 40, 0.5, Rect.square(4.0), 5)
    steps = np.hypot(*np.diff(t.vertices, axis=0).T)
    assert np.allclose(steps, t.lengths, rtol=0, atol=1e-12)
    ends = t.vertices[:-1] + np.stack(
        [t.lengths * np.cos(t.headings), t.lengths * np.sin(t.headings)], axis=1)
    assert np.allclose(ends, t.vertices[1:], atol=1e-12)


def test_stays_inside_window():
    win = Rect.square(2.0)
    for i in range(20):
        t = generate_trajectory(10.0, 30, 0.5, win, i)
        assert np.all(win.contains(t.vertices))


def test_deterministic_given_seed():
    a = generate_trajectory(10.0, 10, 0.5, Rect.square(4.0), 77)
    b = generate_trajectory(10.0, 10, 0.5, Rect.square(4.0), 77)
    assert np.array_equal(a.vertices, b.vertices)


def test_sample_arclength_spacing_and_endpoints():
    t = generate_trajectory(10.0, 8, 0.5, Rect.square(4.0), 9)
    pts = t.sample_arclength(0.01)
    assert np.allclose(pts[0], t.vertices[0])
    assert np.allclose(pts[-1], t.vertices[-1])
    gaps = np.hypot(*np.diff(pts, axis=0).T)
    assert gaps.max() <= 0.01 + 1e-12


def test_window_too_small_raises():
    with pytest.raises(ConfigurationError):
        generate_trajectory(10.0, 5, 50.0, Rect.square(0.01), 1)


def test_invalid_args():
    with pytest.raises(ParameterError):
        generate_trajectory(0.0, 5, 0.5, BIG, 1)
    with pytest.raises(ParameterError):
        generate_trajectory(10.0, 0, 0.5, BIG, 1)
    with pytest.raises(ParameterError):
        generate_trajectory(10.0, 5, 0.0, BIG, 1)
