import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sarbp.signal_model import (
    C,
    ArrayGeometry,
    ConfigError,
    RadarParams,
    Trajectory,
    accelerating_trajectory,
    all_antenna_positions,
    antenna_positions,
    arc_trajectory,
    chirp_rate,
    derived_waveform,
    measurement_time,
    straight_trajectory,
)


def one_chirp(**kw):
    base = dict(f0=1e9, bandwidth=1.0, chirp_duration=1.0, pri=1.0, num_chirps=1, num_rx=1,
                num_samples=2, sample_rate=2.0)
    base.update(kw)
    return RadarParams(**base)


def pose(p, h):
    return Trajectory([p], [h], [h])


class TestChirpRate:
    def test_measurement_radar(self):
        exact = Fraction(931_000_000) / Fraction("102.4e-6")
        assert chirp_rate(RadarParams.measurement_radar()) == pytest.approx(float(exact), rel=1e-15)
        assert chirp_rate(RadarParams.measurement_radar()) == pytest.approx(9.0918e12, rel=1e-4)

    def test_unit(self):
        assert chirp_rate(one_chirp()) == 1.0

    def test_500mhz_over_50us(self):
        p = one_chirp(bandwidth=500e6, chirp_duration=50e-6, pri=50e-6, sample_rate=2 / 50e-6)
        assert chirp_rate(p) == pytest.approx(1e13, rel=1e-15)

    @given(st.floats(1e3, 1e10), st.floats(1e-7, 1e-2))
    def test_rate_times_duration_is_bandwidth(self, b, t):
        p = one_chirp(bandwidth=b, chirp_duration=t, pri=t, sample_rate=2 / t)
        assert abs(chirp_rate(p) * t - b) <= math.ulp(b)


class TestMeasurementTime:
    def test_measurement_radar(self):
        t = measurement_time(RadarParams.measurement_radar())
        assert t == pytest.approx(0.1092608, rel=1e-12)
        assert abs(t - 0.1093) / 0.1093 < 5e-4

    def test_single_chirp(self):
        assert measurement_time(one_chirp()) == 1.0

    def test_long_sequence(self):
        assert measurement_time(RadarParams.measurement_radar(num_chirps=8192)) == pytest.approx(0.8740864, rel=1e-12)

    @given(st.integers(1, 5000), st.integers(1, 5000))
    def test_monotone_in_chirp_count(self, a, b):
        pa, pb = RadarParams.measurement_radar(num_chirps=a), RadarParams.measurement_radar(num_chirps=b)
        assert (measurement_time(pa) <= measurement_time(pb)) == (a <= b)

    def test_monotone_in_pri(self):
        p = RadarParams.measurement_radar()
        assert measurement_time(p.replace(pri=2e-4)) > measurement_time(p)


class TestDerivedWaveform:
    def test_measurement_radar(self):
        w = derived_waveform(RadarParams.measurement_radar())
        assert w.wavelength == pytest.approx(3.914e-3, rel=1e-3)
        assert w.range_resolution == pytest.approx(0.1610, rel=1e-3)
        assert w.bin_spacing == pytest.approx(1 / 102.4e-6)
        assert w.wavelength / 4 == pytest.approx(0.978e-3, rel=1e-3)

    def test_unit_range_resolution(self):
        assert derived_waveform(one_chirp(bandwidth=C / 2)).range_resolution == 1.0


class TestAntennaPositions:
    def test_identity(self):
        q_tx, _ = antenna_positions(pose((0, 0), (1, 0)), ArrayGeometry((0, 0), [(0, 0)]), 0, 0)
        np.testing.assert_array_equal(q_tx, [0, 0])

    def test_quarter_turn(self):
        _, q_rx = antenna_positions(pose((5, 0), (0, 1)), ArrayGeometry((0, 0), [(0.1, 0)]), 0, 0)
        np.testing.assert_allclose(q_rx, [5, 0.1], atol=1e-15)

    def test_no_rotation(self):
        _, q_rx = antenna_positions(pose((1, 2), (1, 0)), ArrayGeometry((0, 0), [(0.02, 0)]), 0, 0)
        np.testing.assert_allclose(q_rx, [1.02, 2], atol=1e-15)

    def test_bounds(self):
        t, g = pose((0, 0), (1, 0)), ArrayGeometry((0, 0), [(0, 0)])
        with pytest.raises(IndexError):
            antenna_positions(t, g, 1, 0)
        with pytest.raises(IndexError):
            antenna_positions(t, g, 0, 1)

    def test_vectorised_agrees(self):
        p = RadarParams.desk()
        t = arc_trajectory(p, 3.0, 10.0)
        g = ArrayGeometry((0.01, -0.02), np.random.default_rng(1).normal(size=(4, 2)) * 0.01)
        q_tx, q_rx = all_antenna_positions(t, g)
        for m in (0, 17, 63):
            for n in range(4):
                a, b = antenna_positions(t, g, m, n)
                np.testing.assert_allclose(q_tx[m], a, atol=1e-15)
                np.testing.assert_allclose(q_rx[m, n], b, atol=1e-15)

    @given(st.floats(-np.pi, np.pi), st.lists(st.floats(-0.5, 0.5), min_size=4, max_size=4),
           st.floats(-100, 100), st.floats(-100, 100))
    def test_isometry(self, ang, offs, px, py):
        h = (math.cos(ang), math.sin(ang))
        g = ArrayGeometry((0, 0), [offs[:2], offs[2:]])
        t = pose((px, py), h)
        _, a = antenna_positions(t, g, 0, 0)
        _, b = antenna_positions(t, g, 0, 1)
        assert abs(np.hypot(*(a - b)) - np.hypot(*(g.rx_offsets[0] - g.rx_offsets[1]))) < 1e-9


class TestRadarParams:
    @pytest.mark.parametrize("bad", [
        dict(f0=0.0), dict(bandwidth=-1.0), dict(chirp_duration=2.0), dict(num_chirps=0),
        dict(num_rx=0), dict(num_samples=1, sample_rate=1.0), dict(sample_rate=3.0),
    ])
    def test_invariants(self, bad):
        with pytest.raises(ConfigError):
            one_chirp(**bad)

    def test_config_keys_round_trip(self, tmp_path):
        p = RadarParams.measurement_radar()
        path = tmp_path / "radar.json"
        p.save(path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"f0_hz", "bandwidth_hz", "chirp_duration_s", "pri_s", "num_chirps",
                            "num_rx", "num_samples", "sample_rate_hz"}
        assert RadarParams.load(path) == p

    def test_config_rejects_unknown_and_missing(self):
        d = RadarParams.desk().to_dict()
        with pytest.raises(ConfigError):
            RadarParams.from_dict({**d, "extra": 1})
        d.pop("pri_s")
        with pytest.raises(ConfigError):
            RadarParams.from_dict(d)

    def test_default_sampling(self):
        p = RadarParams.measurement_radar()
        assert p.num_samples == 1024
        assert p.sample_rate == pytest.approx(1e7, rel=1e-12)


class TestTrajectories:
    def test_heading_must_be_unit(self):
        with pytest.raises(ConfigError):
            Trajectory([[0, 0]], [[1, 0]], [[1.0, 1e-3]])

    def test_arrays_read_only(self):
        t = straight_trajectory(RadarParams.desk(), 10.0)
        with pytest.raises(ValueError):
            t.poses[0, 0] = 1.0

    def test_straight_geometry(self):
        p = RadarParams.desk()
        t = straight_trajectory(p, 10.0, center=(1.0, 2.0))
        np.testing.assert_allclose(t.center, [1.0, 2.0], atol=1e-12)
        assert t.aperture_length == pytest.approx(63 * p.pri * 10.0)
        assert len(t) == p.num_chirps

    def test_accelerating_speed_ramp(self):
        p = RadarParams.desk()
        t = accelerating_trajectory(p, 9.0, 11.0)
        speed = np.hypot(*t.velocities.T)
        assert speed[0] == pytest.approx(9.0) and speed[-1] == pytest.approx(11.0)
        np.testing.assert_allclose(t.center, [0, 0], atol=1e-12)
        # mean speed times duration
        assert t.aperture_length == pytest.approx(10.0 * 63 * p.pri, rel=1e-9)

    def test_arc_stays_on_circle(self):
        t = arc_trajectory(RadarParams.desk(), 4.0, 10.0)
        r = np.hypot(t.poses[:, 0], t.poses[:, 1] - 4.0)
        np.testing.assert_allclose(r, 4.0, rtol=1e-12)

    def test_file_round_trip_derives_headings(self):
        t = accelerating_trajectory(RadarParams.desk(), 9.0, 11.0)
        d = t.to_dict()
        d.pop("headings")
        back = Trajectory.from_dict(json.loads(json.dumps(d)))
        np.testing.assert_allclose(back.headings, t.headings, atol=1e-15)
        np.testing.assert_array_equal(back.poses, t.poses)
