import math

import numpy as np
import pytest

from rtmpaint.dsp import (
    ComplexSpectrogram,
    LogMelFeature,
    MelFilterbank,
    StftParams,
    hz_to_mel,
    istft,
    log_mel,
    measure_snr,
    mel_filterbank,
    mel_to_hz,
    mix_at_snr,
    stft,
)


class TestStftParams:
    def test_defaults(self):
        p = StftParams()
        assert (p.sample_rate, p.window_length, p.hop, p.fft_size) == (16000, 400, 160, 512)
        assert p.n_bins == 257

    def test_bin_frequencies(self):
        p = StftParams()
        f = p.freqs()
        assert f[0] == 0.0
        assert f[1] == pytest.approx(16000 / 512)
        assert f[-1] == pytest.approx(8000.0)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            StftParams(16000, 400, 500, 512)  # hop > window
        with pytest.raises(ValueError):
            StftParams(16000, 600, 160, 512)  # window > fft
        with pytest.raises(ValueError):
            StftParams(16000, 400, 0, 512)


class TestStft:
    def test_frame_count(self, rng):
        p = StftParams()
        spec = stft(rng.standard_normal(16000), p)
        assert spec.data.shape == (1, 257, (16000 - 400) // 160 + 1)

    def test_sinusoid_concentrates_at_its_bin(self):
        # window == fft keeps the Hann mainlobe within +/- 1 bin exactly
        p = StftParams(16000, 256, 64, 256)
        bin_idx = 40
        f = bin_idx * p.sample_rate / p.fft_size
        t = np.arange(8000) / p.sample_rate
        spec = stft(np.sin(2 * np.pi * f * t), p)
        power = np.abs(spec.data[0]) ** 2
        frame = power[:, power.shape[1] // 2]
        assert frame[bin_idx - 1 : bin_idx + 2].sum() / frame.sum() >= 0.99

    def test_zero_signal(self):
        p = StftParams()
        assert np.all(stft(np.zeros(1000), p).data == 0)

    def test_too_short_signal(self):
        with pytest.raises(ValueError):
            stft(np.zeros(399), StftParams())

    def test_linearity(self, rng):
        p = StftParams(16000, 256, 64, 256)
        x, y = rng.standard_normal((2, 4000))
        lhs = stft(2.5 * x - 1.25 * y, p).data
        rhs = 2.5 * stft(x, p).data - 1.25 * stft(y, p).data
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(rhs)

    def test_delay_phase_convention(self, rng):
        # package convention: tau seconds of delay multiplies bin f by exp(+i 2 pi f tau)
        p = StftParams()
        x = np.zeros(4000)
        x[1000:3000] = rng.standard_normal(2000)
        d = 32  # samples
        xd = np.concatenate([np.zeros(d), x[:-d]])
        a = stft(x, p).data[0, :, 10]
        b = stft(xd, p).data[0, :, 10 + 0]
        # compare at the frame where the delayed content best aligns
        shift = np.exp(1j * 2 * np.pi * p.freqs() * d / p.sample_rate)
        # frame offset of d/hop frames: pick a frame multiple of hop for exactness
        d2 = p.hop
        xd2 = np.concatenate([np.zeros(d2), x[:-d2]])
        b2 = stft(xd2, p).data[0, :, 11]
        assert np.allclose(b2, a, atol=1e-12)  # integer-hop delay shifts frames
        del b, shift


class TestIstft:
    @pytest.mark.parametrize(
        "params",
        [StftParams(), StftParams(16000, 256, 64, 256), StftParams(8000, 200, 100, 256)],
    )
    def test_roundtrip_white_noise(self, params, rng):
        x = rng.standard_normal(int(params.sample_rate * 0.6))
        y = istft(stft(x, params), params)[0]
        lo, hi = params.window_length, min(x.size, y.size) - params.window_length
        err = np.linalg.norm(y[lo:hi] - x[lo:hi]) / np.linalg.norm(x[lo:hi])
        assert err < 1e-6

    def test_roundtrip_multichannel(self, rng):
        p = StftParams(16000, 256, 64, 256)
        x = rng.standard_normal((3, 4000))
        y = istft(stft(x, p), p)
        assert y.shape[0] == 3
        lo = p.window_length
        assert np.allclose(y[:, lo:-lo], x[:, lo : y.shape[1] - lo], atol=1e-9)

    def test_params_mismatch(self, rng):
        spec = stft(rng.standard_normal(4000), StftParams(16000, 256, 64, 256))
        with pytest.raises(ValueError):
            istft(spec, StftParams(16000, 256, 128, 256))


class TestSpectrogramType:
    def test_role_and_shape_validation(self, rng, tiny_params):
        data = rng.standard_normal((2, tiny_params.n_bins, 4)) + 0j
        with pytest.raises(ValueError):
            ComplexSpectrogram(data, tiny_params, role="mystery")
        with pytest.raises(ValueError):
            ComplexSpectrogram(data[:, :-1], tiny_params)
        bad = data.copy()
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            ComplexSpectrogram(bad, tiny_params)

    def test_immutable(self, rng, tiny_params):
        spec = ComplexSpectrogram(
            rng.standard_normal((1, tiny_params.n_bins, 2)) + 0j, tiny_params
        )
        with pytest.raises(ValueError):
            spec.data[0, 0, 0] = 1.0


class TestMelFilterbank:
    def test_mel_scale_reference_point(self):
        assert hz_to_mel(700.0) == pytest.approx(2595.0 * math.log10(2.0), rel=1e-12)
        assert mel_to_hz(hz_to_mel(1234.5)) == pytest.approx(1234.5, rel=1e-12)

    def test_single_filter_full_band(self):
        p = StftParams()
        bank = mel_filterbank(p, n_mels=1)
        w = bank.weights[0]
        assert w[0] == 0.0 and w[-1] == 0.0  # zero at band edges
        assert w.max() > 0
        assert 0 < np.argmax(w) < w.size - 1  # peak strictly interior

    def test_interior_bins_covered(self):
        p = StftParams()
        for k in (1, 8, 40, 128):
            bank = mel_filterbank(p, n_mels=k)
            f = p.freqs()
            interior = (f > 0) & (f < 8000)
            assert np.all(bank.weights.sum(axis=0)[interior] > 0)

    def test_every_filter_nonempty_at_default_resolution(self):
        bank = mel_filterbank(StftParams(), n_mels=128)
        assert bank.n_mels == 128
        assert np.all(bank.weights.sum(axis=1) > 0)

    def test_invalid_band(self):
        p = StftParams()
        with pytest.raises(ValueError):
            mel_filterbank(p, n_mels=4, f_low=5000, f_high=4000)
        with pytest.raises(ValueError):
            mel_filterbank(p, n_mels=4, f_high=9000)
        with pytest.raises(ValueError):
            mel_filterbank(p, n_mels=0)


class TestLogMel:
    def _spec(self, power, params):
        data = np.sqrt(power) * np.ones((1, params.n_bins, 1), dtype=complex)
        return ComplexSpectrogram(data, params)

    def test_single_bin_value(self, tiny_params):
        weights = np.zeros((1, tiny_params.n_bins))
        weights[0, 3] = 1.0
        bank = MelFilterbank(weights=weights, f_low=0, f_high=8000)
        spec = self._spec(100.0, tiny_params)
        assert log_mel(spec, bank).data[0, 0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_zero_power_floor(self, tiny_params):
        bank = mel_filterbank(tiny_params, n_mels=4)
        spec = self._spec(0.0, tiny_params)
        assert np.all(log_mel(spec, bank).data == -10.0)

    def test_scaling_adds_constant(self, rng, tiny_params):
        # log identity: x10 in band power adds exactly 1, x10 in amplitude adds 2
        bank = mel_filterbank(tiny_params, n_mels=6)
        data = rng.uniform(0.5, 2.0, (2, tiny_params.n_bins, 3)) + 0j
        a = log_mel(ComplexSpectrogram(data, tiny_params), bank).data
        b = log_mel(ComplexSpectrogram(np.sqrt(10.0) * data, tiny_params), bank).data
        c = log_mel(ComplexSpectrogram(10.0 * data, tiny_params), bank).data
        assert np.allclose(b - a, 1.0, atol=1e-9)
        assert np.allclose(c - a, 2.0, atol=1e-9)

    def test_monotonic_in_power(self, rng, tiny_params):
        bank = mel_filterbank(tiny_params, n_mels=6)
        data = rng.uniform(0.1, 1.0, (1, tiny_params.n_bins, 2)) + 0j
        base = log_mel(ComplexSpectrogram(data, tiny_params), bank).data
        bumped = data.copy()
        bumped[0, 7, 1] *= 3.0
        after = log_mel(ComplexSpectrogram(bumped, tiny_params), bank).data
        assert np.all(after >= base - 1e-12)

    def test_bin_count_mismatch(self, rng, tiny_params):
        bank = mel_filterbank(StftParams(), n_mels=4)
        spec = self._spec(1.0, tiny_params)
        with pytest.raises(ValueError):
            log_mel(spec, bank)


class TestMixAtSnr:
    def test_noise_power_matches_request(self, rng):
        x = rng.standard_normal((1, 80000))  # 5 s at 16 kHz
        noisy, mu = mix_at_snr(x, rng, [0.0])
        p_noise = np.mean((noisy - x) ** 2)
        assert 10 * abs(math.log10(p_noise / np.mean(x**2))) < 0.3

    def test_minus_30_db_noise_power(self, rng):
        x = rng.standard_normal((1, 80000))
        noisy, _ = mix_at_snr(x, rng, [-30.0])
        ratio = np.mean((noisy - x) ** 2) / np.mean(x**2)
        assert ratio == pytest.approx(1000.0, rel=0.1)

    def test_measured_snr_within_tolerance(self, rng):
        x = rng.standard_normal((4, 80000))
        targets = [-30.0, -15.0, -5.0, 0.0]
        noisy, mu = mix_at_snr(x, rng, targets)
        for n, want in enumerate(targets):
            got = measure_snr(x[n], noisy[n] - x[n])
            assert abs(got - want) < 0.3
        assert np.array_equal(mu, targets)

    def test_silent_channel_rejected(self, rng):
        x = np.zeros((1, 100))
        with pytest.raises(ValueError):
            mix_at_snr(x, rng, [0.0])

    def test_channel_noise_independent_of_channel_count(self, rng):
        x = rng.standard_normal((5, 1000))
        noisy3, _ = mix_at_snr(x[:3], np.random.default_rng(99), [0.0] * 3)
        noisy5, _ = mix_at_snr(x, np.random.default_rng(99), [0.0] * 5)
        assert np.array_equal(noisy3, noisy5[:3])


class TestMeasureSnr:
    def test_equal_power_is_zero_db(self, rng):
        x = rng.standard_normal(1000)
        assert measure_snr(x, x) == pytest.approx(0.0, abs=1e-12)

    def test_tenth_amplitude_is_twenty_db(self, rng):
        x = rng.standard_normal(1000)
        assert measure_snr(x, x / 10) == pytest.approx(20.0, abs=1e-12)

    def test_zero_residual_sentinel(self, rng):
        assert measure_snr(rng.standard_normal(10), np.zeros(10)) == float("inf")

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            measure_snr(np.zeros(0), np.zeros(0))
        with pytest.raises(ValueError):
            measure_snr(np.zeros(5), np.zeros(5))
        with pytest.raises(ValueError):
            measure_snr(np.ones(4), np.ones(5))

    def test_complex_arrays(self):
        ref = np.array([1 + 1j, 1 - 1j])
        assert measure_snr(ref, ref / 10) == pytest.approx(20.0, abs=1e-12)


def test_log_mel_feature_validation():
    with pytest.raises(ValueError):
        LogMelFeature(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        LogMelFeature(np.full((1, 2, 3), np.inf))
