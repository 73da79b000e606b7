import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sarbp.signal_model import C, ArrayGeometry, ConfigError, RadarParams, chirp_rate, straight_trajectory
from sarbp.simulator import (
    BeatSpectrum,
    DataError,
    PointScatterer,
    add_noise,
    fast_time,
    range_compress,
    simulate_beat_time,
)

DESK = RadarParams.desk()


def mono(params):
    """Single TX/RX pair at the platform origin."""
    return ArrayGeometry((0, 0), [(0, 0)] * params.num_rx)


def still(params, n_chirps=1, n_rx=1):
    p = params.replace(num_chirps=n_chirps, num_rx=n_rx)
    return p, straight_trajectory(p, 0.0), mono(p)


def inst_freq(samples, fs):
    return np.diff(np.unwrap(np.angle(samples))) * fs / (2 * np.pi)


class TestBeatSignal:
    def test_static_single_chirp_has_constant_magnitude(self):
        p, t, g = still(DESK)
        s = simulate_beat_time(p, t, g, [PointScatterer((0.0, 4.0), 0.6 - 0.8j)])
        np.testing.assert_allclose(np.abs(s), 1.0, rtol=1e-12)

    def test_beat_frequency_is_mu_times_delay(self):
        p, t, g = still(DESK)
        s = simulate_beat_time(p, t, g, [PointScatterer((0.0, 6.0))])
        f = inst_freq(s[0, 0], p.sample_rate)
        np.testing.assert_allclose(f, chirp_rate(p) * 12.0 / C, rtol=1e-9)

    def test_doppler_shift(self):
        p = DESK.replace(num_chirps=1, num_rx=1)
        g = mono(p)
        target = PointScatterer((5.0, 0.0))  # straight ahead: closing speed 2 v
        moving = simulate_beat_time(p, straight_trajectory(p, 7.0), g, [target])
        parked = simulate_beat_time(p, straight_trajectory(p, 0.0), g, [target])
        shift = inst_freq(moving[0, 0], p.sample_rate) - inst_freq(parked[0, 0], p.sample_rate)
        np.testing.assert_allclose(shift, p.f0 * 14.0 / C, rtol=1e-6)

    def test_coincident_scatterer_rejected(self):
        p, t, g = still(DESK)
        with pytest.raises(ConfigError):
            simulate_beat_time(p, t, g, [PointScatterer((0.0, 0.0))])

    def test_empty_scene_rejected(self):
        p, t, g = still(DESK)
        with pytest.raises(ConfigError):
            simulate_beat_time(p, t, g, [])

    def test_fast_time_centred(self):
        t = fast_time(DESK)
        assert t.sum() == pytest.approx(0.0, abs=1e-18)
        assert t[1] - t[0] == pytest.approx(1 / DESK.sample_rate)


class TestRangeCompress:
    def test_zero_in_zero_out(self):
        spec = range_compress(np.zeros((2, 3, DESK.num_samples)), DESK)
        assert not spec.data.any()
        assert spec.f_start == 0.0 and spec.f_step == DESK.sample_rate / DESK.num_samples

    @pytest.mark.parametrize("k", [0, 5, 77])
    def test_tone_on_bin_centre(self, k):
        t = fast_time(DESK)
        tone = np.exp(2j * np.pi * k * DESK.sample_rate / DESK.num_samples * t)
        row = range_compress(tone[None, None, :], DESK).data[0, 0]
        assert abs(row[k] - 1.0) < 1e-6
        others = np.delete(np.abs(row), k)
        assert others.max() < 1e-5

    def test_parseval_rectangular(self):
        x = np.random.default_rng(3).normal(size=(2, 2, DESK.num_samples, 2)) @ [1, 1j]
        spec = range_compress(x, DESK).data.astype(np.complex128)
        lhs = DESK.num_samples * np.sum(np.abs(spec) ** 2)
        rhs = np.sum(np.abs(x) ** 2)
        assert abs(lhs - rhs) / rhs < 1e-5

    def test_peak_at_predicted_bin(self):
        p, t, g = still(DESK)
        spec = range_compress(simulate_beat_time(p, t, g, [PointScatterer((0.0, 7.3))]), p)
        predicted = chirp_rate(p) * (2 * 7.3 / C) / spec.f_step
        assert np.argmax(np.abs(spec.data[0, 0])) == round(predicted)

    def test_doubling_distance_doubles_bin(self):
        p, t, g = still(DESK)
        bins = []
        for r in (3.1, 6.2):
            spec = range_compress(simulate_beat_time(p, t, g, [PointScatterer((0.0, r))]), p, oversample=4)
            bins.append(np.argmax(np.abs(spec.data[0, 0])) / 4)
        assert abs(bins[1] - 2 * bins[0]) <= 1

    def test_oversampled_axis(self):
        spec = range_compress(np.zeros((1, 1, DESK.num_samples)), DESK, oversample=8)
        assert spec.dims[2] == 8 * DESK.num_samples
        assert spec.f_step == pytest.approx(DESK.sample_rate / DESK.num_samples / 8)

    def test_linearity(self):
        p = DESK
        t, g = straight_trajectory(p, 10.0), ArrayGeometry.uniform_linear(p)
        a, b = PointScatterer((0.4, 5.0)), PointScatterer((-0.9, 8.0), 0.3j)
        both = range_compress(simulate_beat_time(p, t, g, [a, b]), p, "hann").data
        parts = (range_compress(simulate_beat_time(p, t, g, [a]), p, "hann").data.astype(np.complex128)
                 + range_compress(simulate_beat_time(p, t, g, [b]), p, "hann").data)
        assert np.abs(both - parts).max() / np.abs(parts).max() < 1e-5


class TestNoise:
    def test_zero_sigma_is_identity(self):
        spec = BeatSpectrum(np.ones((1, 1, 4)), 0.0, 1.0)
        out = add_noise(spec, 0.0, 1)
        np.testing.assert_array_equal(out.data, spec.data)

    def test_mean_power(self):
        spec = BeatSpectrum(np.zeros((1, 1, 200_000)), 0.0, 1.0)
        power = np.mean(np.abs(add_noise(spec, 1.0, 11).data.astype(np.complex128)) ** 2)
        assert abs(power - 2.0) / 2.0 < 0.05

    def test_seeded(self):
        spec = BeatSpectrum(np.zeros((2, 2, 8)), 0.0, 1.0)
        np.testing.assert_array_equal(add_noise(spec, 1.0, 5).data, add_noise(spec, 1.0, 5).data)
        assert not np.array_equal(add_noise(spec, 1.0, 5).data, add_noise(spec, 1.0, 6).data)

    def test_negative_sigma(self):
        with pytest.raises(ConfigError):
            add_noise(BeatSpectrum(np.zeros((1, 1, 2)), 0.0, 1.0), -1.0, 0)


class TestSpectrumFile:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 9), st.floats(-1e6, 1e6), st.floats(1.0, 1e6))
    def test_round_trip(self, tmp_path_factory, m, n, k, f0, df):
        rng = np.random.default_rng(m * 100 + n * 10 + k)
        data = (rng.normal(size=(m, n, k)) + 1j * rng.normal(size=(m, n, k))).astype(np.complex64)
        path = tmp_path_factory.mktemp("s") / "x.sarbp"
        BeatSpectrum(data, f0, df).save(path)
        assert path.stat().st_size == 36 + m * n * k * 8
        back = BeatSpectrum.load(path)
        np.testing.assert_array_equal(back.data, data)
        assert (back.f_start, back.f_step) == (f0, df)

    def test_layout(self, tmp_path):
        data = np.arange(12, dtype=np.float32).reshape(1, 2, 6).astype(np.complex64)
        path = tmp_path / "x.sarbp"
        BeatSpectrum(data, 0.0, 1.0).save(path)
        raw = path.read_bytes()
        assert raw[:8] == b"SARBP1\0\0"
        body = np.frombuffer(raw[36:], dtype="<f4")
        np.testing.assert_array_equal(body[::2], np.arange(12))  # m-major, then rx, then bin

    def test_bad_magic_and_truncation(self, tmp_path):
        path = tmp_path / "x.sarbp"
        BeatSpectrum(np.zeros((1, 1, 4)), 0.0, 1.0).save(path)
        raw = path.read_bytes()
        path.write_bytes(b"NOTSAR\0\0" + raw[8:])
        with pytest.raises(DataError):
            BeatSpectrum.load(path)
        path.write_bytes(raw[:-3])
        with pytest.raises(DataError):
            BeatSpectrum.load(path)
        path.write_bytes(raw[:10])
        with pytest.raises(DataError):
            BeatSpectrum.load(path)
