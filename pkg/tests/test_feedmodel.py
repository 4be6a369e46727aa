import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from racatr.feedmodel import (FeedParams, edge_taper_db, illuminate, illuminate_lattice,
                              illuminate_points, solve_q_for_edge_taper)
from racatr.layout import TABLE2_LAYOUT, ApertureLattice
from racatr.wavefield import FieldGrid

C0 = 299_792_458.0


def test_boresight_defaults_to_aperture_centre():
    feed = FeedParams((-0.065, 0.0, 1.21), 28e9)
    norm = math.hypot(0.065, 1.21)
    assert feed.boresight == pytest.approx((0.065 / norm, 0.0, -1.21 / norm))


@pytest.mark.parametrize("kwargs", [dict(position=(0, 0, -1.0)), dict(pattern_exponent=-1.0),
                                    dict(boresight=(0, 0, -2.0)), dict(frequency=0.0)])
def test_invalid_feed_rejected(kwargs):
    base = dict(position=(0.0, 0.0, 1.0), frequency=28e9)
    with pytest.raises(ValueError):
        FeedParams(**{**base, **kwargs})


def test_on_boresight_point():
    F = 1.21
    feed = FeedParams((0.0, 0.0, F), 28e9, pattern_exponent=7.0)
    v = illuminate_points(feed, 0.0, 0.0)
    k = 2 * math.pi * 28e9 / C0
    assert abs(v) == pytest.approx(1 / F, rel=1e-14)
    assert np.angle(v * np.exp(1j * k * F)) == pytest.approx(0.0, abs=1e-9)


def test_isotropic_amplitude_ratio():
    feed = FeedParams((0.0, 0.0, 1.0), 28e9)
    a, b = illuminate_points(feed, np.array([0.3, -0.1]), np.array([0.2, 0.0]))
    r1, r2 = math.sqrt(0.13 + 1), math.sqrt(0.01 + 1)
    assert abs(a) / abs(b) == pytest.approx(r2 / r1, rel=1e-14)


def test_phase_is_minus_kr():
    feed = FeedParams((-0.065, 0.0, 1.21), 28e9, 20.0)
    x = np.array([0.1, -0.2])
    y = np.array([0.05, 0.1])
    v = illuminate_points(feed, x, y)
    r = np.sqrt((x + 0.065) ** 2 + y**2 + 1.21**2)
    k = feed.wavenumber
    dphi = np.angle(v[0] * np.conj(v[1]))
    assert dphi == pytest.approx(np.angle(np.exp(-1j * k * (r[0] - r[1]))), abs=1e-9)


def test_frequency_scaling_doubles_phase():
    lat = ApertureLattice(8, 0.02)
    a = FeedParams((-0.065, 0.0, 1.21), 14e9, 10.0)
    b = replace(a, frequency=28e9)
    fa, fb = illuminate_lattice(a, lat), illuminate_lattice(b, lat)
    assert np.allclose(np.abs(fa), np.abs(fb), rtol=1e-14)
    x, y = lat.positions()
    r = np.sqrt((x + 0.065) ** 2 + y**2 + 1.21**2)
    # unwrapped phase is -k r; doubling f doubles it exactly
    assert np.allclose(np.angle(fb * np.exp(1j * 2 * a.wavenumber * r)), 0.0, atol=1e-9)


@given(q=st.floats(0.5, 80.0), psi1=st.floats(0.0, 1.2), dpsi=st.floats(0.01, 0.3))
def test_amplitude_decreases_off_boresight(q, psi1, dpsi):
    # points at equal distance from a feed looking straight down
    R = 1.0
    feed = FeedParams((0.0, 0.0, 2.0), 28e9, q)
    psi2 = min(psi1 + dpsi, 1.5)
    # sphere of radius R about the feed cut by z = 0 is too restrictive; use the z = 0 plane and
    # normalise out 1/r so only the pattern factor is compared
    x1, x2 = 2.0 * math.tan(psi1), 2.0 * math.tan(psi2)
    a1, a2 = np.abs(illuminate_points(feed, np.array([x1, x2]), np.zeros(2)))
    r1, r2 = 2.0 / math.cos(psi1), 2.0 / math.cos(psi2)
    assert a2 * r2 < a1 * r1 * R


def test_illuminate_grid():
    feed = FeedParams((0.0, 0.0, 1.0), 28e9, 3.0)
    grid = FieldGrid(np.zeros((4, 5)), 0.01, 0.02, C0 / 28e9, 0.0, (-0.02, -0.03))
    out = illuminate(feed, grid)
    X, Y = grid.coordinates()
    assert np.allclose(out.samples, illuminate_points(feed, X, Y))
    assert out.dx == 0.01 and out.origin == (-0.02, -0.03)


def test_illuminate_rejects_points_behind_pattern():
    feed = FeedParams((0.0, 0.0, 1.0), 28e9, 2.0, boresight=(1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        illuminate_points(feed, np.array([-1.0]), np.array([0.0]))


def _corner_taper(layout, q):
    # direct evaluation of the corner level against the peak
    lat = ApertureLattice.from_layout(layout)
    x, y = lat.positions()
    fx, _, F = layout.feed_position
    v = np.stack([x - fx, y, np.full_like(x, -F)], -1)
    r = np.linalg.norm(v, axis=-1)
    b = -np.array(layout.feed_position) / np.linalg.norm(layout.feed_position)
    lvl = q * np.log10(v @ b / r) - np.log10(r)
    corners = [lvl[0, 0], lvl[0, -1], lvl[-1, 0], lvl[-1, -1]]
    return 20 * (min(corners) - lvl.max())


@pytest.mark.parametrize("taper", [-12.0, -20.0])
def test_solve_q_round_trip(taper):
    q = solve_q_for_edge_taper(TABLE2_LAYOUT, taper)
    assert _corner_taper(TABLE2_LAYOUT, q) == pytest.approx(taper, abs=0.01)
    feed = FeedParams.from_layout(TABLE2_LAYOUT, q)
    assert edge_taper_db(feed, ApertureLattice.from_layout(TABLE2_LAYOUT)) == pytest.approx(taper, abs=0.01)


def test_solve_q_monotone():
    assert solve_q_for_edge_taper(TABLE2_LAYOUT, -6.0) < solve_q_for_edge_taper(TABLE2_LAYOUT, -12.0)


def test_zero_taper_far_on_axis_feed():
    far = replace(TABLE2_LAYOUT, feed_offset=0.0, focal_length=100.0, propagation_distance=101.0)
    assert solve_q_for_edge_taper(far, -0.0) == 0.0


def test_solve_q_errors():
    with pytest.raises(ValueError):
        solve_q_for_edge_taper(TABLE2_LAYOUT, 3.0)
    with pytest.raises(ValueError):
        solve_q_for_edge_taper(TABLE2_LAYOUT, -1e6)


def test_moved_feed_reaims():
    feed = FeedParams.from_layout(TABLE2_LAYOUT, 10.0)
    m = feed.moved(dx=-0.01, dz=0.02)
    assert m.position == pytest.approx((-0.075, 0.0, 1.23))
    p = np.array(m.position)
    assert m.boresight == pytest.approx(tuple(-p / np.linalg.norm(p)))
    assert m.pattern_exponent == 10.0
