"""Time-frequency analysis, mel features, and SNR utilities.

Phase convention: spectrogram coefficients are stored so that delaying a
signal by tau seconds multiplies bin f by exp(+i*2*pi*f*tau). This is the
conjugate of the plain FFT convention and matches the exp(+i*k*r) sign of
the propagation kernel, so back-projection with the conjugated kernel
aligns genuinely delayed arrivals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import check_NOLA, get_window

SPECTROGRAM_ROLES = ("observed", "clean", "inpainted", "image")

POWER_FLOOR = 1e-10


@dataclass(frozen=True)
class StftParams:
    """Analysis parameters. Defaults: 25 ms Hann / 10 ms hop at 16 kHz."""

    sample_rate: int = 16000
    window_length: int = 400
    hop: int = 160
    fft_size: int = 512

    def __post_init__(self):
        if not (0 < self.hop <= self.window_length <= self.fft_size):
            raise ValueError("need 0 < hop <= window_length <= fft_size")
        if not check_NOLA(self.window(), self.window_length, self.window_length - self.hop):
            raise ValueError("window violates nonzero overlap-add at this hop")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def freqs(self) -> np.ndarray:
        """(F,) physical bin frequencies in Hz."""
        return np.arange(self.n_bins) * self.sample_rate / self.fft_size

    def window(self) -> np.ndarray:
        return get_window("hann", self.window_length, fftbins=True)

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.window_length:
            raise ValueError(
                f"signal of {n_samples} samples is shorter than the "
                f"{self.window_length}-sample analysis window"
            )
        return (n_samples - self.window_length) // self.hop + 1

    def n_samples(self, n_frames: int) -> int:
        return self.hop * (n_frames - 1) + self.window_length


@dataclass(frozen=True)
class ComplexSpectrogram:
    """C x F x T complex tensor with its analysis parameters and role tag."""

    data: np.ndarray
    params: StftParams
    role: str = "observed"

    def __post_init__(self):
        if self.role not in SPECTROGRAM_ROLES:
            raise ValueError(f"unknown spectrogram role {self.role!r}")
        if self.data.ndim != 3:
            raise ValueError("spectrogram data must be (channels, bins, frames)")
        if self.data.shape[1] != self.params.n_bins:
            raise ValueError(
                f"bin count {self.data.shape[1]} does not match params ({self.params.n_bins})"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("spectrogram contains non-finite entries")
        self.data.flags.writeable = False

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]

    def with_data(self, data: np.ndarray, role: str | None = None) -> "ComplexSpectrogram":
        return ComplexSpectrogram(data=data, params=self.params, role=role or self.role)


def stft(signal: np.ndarray, params: StftParams, role: str = "observed") -> ComplexSpectrogram:
    """Short-time transform of one (S,) or many (N, S) real channels.

    Frames start at multiples of the hop with no padding, so
    T = (S - window_length) // hop + 1.
    """
    x = np.atleast_2d(np.asarray(signal, dtype=float))
    n_frames = params.n_frames(x.shape[-1])
    w = params.window()
    idx = params.hop * np.arange(n_frames)[:, None] + np.arange(params.window_length)[None, :]
    frames = x[:, idx] * w  # (N, T, W)
    spec = np.conj(np.fft.rfft(frames, n=params.fft_size, axis=-1))  # delay -> exp(+i w tau)
    return ComplexSpectrogram(np.ascontiguousarray(spec.transpose(0, 2, 1)), params, role)


def istft(spec: ComplexSpectrogram, params: StftParams) -> np.ndarray:
    """Weighted overlap-add synthesis; returns an (N, S) real array.

    Exact inverse of :func:`stft` on interior samples; edge samples with
    partial window coverage are reconstructed from what is available.
    """
    if spec.params != params:
        raise ValueError("spectrogram parameters do not match the requested synthesis")
    w = params.window()
    frames = np.fft.irfft(np.conj(spec.data.transpose(0, 2, 1)), n=params.fft_size, axis=-1)
    frames = frames[..., : params.window_length] * w  # (N, T, W)
    n_ch, n_frames, _ = frames.shape
    n_out = params.n_samples(n_frames)
    out = np.zeros((n_ch, n_out))
    wsum = np.zeros(n_out)
    for t in range(n_frames):
        lo = t * params.hop
        out[:, lo : lo + params.window_length] += frames[:, t, :]
        wsum[lo : lo + params.window_length] += w**2
    # Suppress the few outermost samples where the window-sum is tiny:
    # modified (non-STFT-consistent) spectrograms would otherwise blow up
    # there. Interior reconstruction is unaffected.
    return out / np.maximum(wsum, 1e-3 * wsum.max())


@dataclass(frozen=True)
class MelFilterbank:
    """K x F non-negative triangular filters on the mel scale."""

    weights: np.ndarray
    f_low: float
    f_high: float

    def __post_init__(self):
        if self.weights.ndim != 2:
            raise ValueError("filterbank must be (K, F)")
        if self.weights.min() < 0:
            raise ValueError("filter weights must be non-negative")
        if np.any(self.weights.sum(axis=1) == 0):
            raise ValueError("every filter must cover at least one bin")
        self.weights.flags.writeable = False

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class LogMelFeature:
    """N x K x T log10 band powers."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError("log-mel feature must be (channels, mels, frames)")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("log-mel feature contains non-finite entries")
        self.data.flags.writeable = False


def hz_to_mel(f_hz) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(f_hz, dtype=float) / 700.0)


def mel_to_hz(mel) -> np.ndarray | float:
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(
    params: StftParams, n_mels: int = 128, f_low: float = 0.0, f_high: float | None = None
) -> MelFilterbank:
    """Triangular filters with corners uniformly spaced on the mel scale."""
    nyquist = params.sample_rate / 2
    if f_high is None:
        f_high = nyquist
    if not (0 <= f_low < f_high <= nyquist):
        raise ValueError(f"invalid mel band [{f_low}, {f_high}] for Nyquist {nyquist}")
    if n_mels < 1:
        raise ValueError("need at least one mel filter")

    edges = mel_to_hz(np.linspace(hz_to_mel(f_low), hz_to_mel(f_high), n_mels + 2))
    edges[0], edges[-1] = f_low, f_high  # pin band edges against mel round-off
    bins = params.freqs()
    left, center, right = edges[:-2], edges[1:-1], edges[2:]
    up = (bins[None, :] - left[:, None]) / np.maximum(center - left, 1e-30)[:, None]
    down = (right[:, None] - bins[None, :]) / np.maximum(right - center, 1e-30)[:, None]
    weights = np.maximum(0.0, np.minimum(up, down))

    # Narrow filters can fall between bin centers at coarse FFT resolution;
    # pin those to the bin nearest their center so no band is silently lost.
    empty = np.where(weights.sum(axis=1) == 0)[0]
    for k in empty:
        weights[k, np.argmin(np.abs(bins - center[k]))] = 1.0

    return MelFilterbank(weights=weights, f_low=float(f_low), f_high=float(f_high))


def log_mel(
    spec: ComplexSpectrogram, bank: MelFilterbank, power_floor: float = POWER_FLOOR
) -> LogMelFeature:
    """log10 of mel-band power, floored so silence stays finite."""
    if bank.weights.shape[1] != spec.params.n_bins:
        raise ValueError("filterbank bin count does not match the spectrogram")
    power = np.abs(spec.data) ** 2  # (N, F, T)
    banded = np.einsum("kf,nft->nkt", bank.weights, power)
    return LogMelFeature(np.log10(np.maximum(banded, power_floor)))


def mix_at_snr(
    clean: np.ndarray, rng: np.random.Generator, snr_db: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Add white Gaussian noise per channel at the requested SNRs.

    Each channel draws from its own generator spawned off ``rng``, so the
    noise on channel n does not depend on how many channels follow it.
    Returns (noisy, snr_db as an array).
    """
    x = np.atleast_2d(np.asarray(clean, dtype=float))
    mu = np.asarray(snr_db, dtype=float)
    if mu.shape != (x.shape[0],):
        raise ValueError("need one SNR per channel")
    p_sig = np.mean(x**2, axis=1)
    if np.any(p_sig == 0):
        raise ValueError("SNR is undefined for an all-zero channel")
    p_noise = p_sig * 10.0 ** (-mu / 10.0)
    streams = rng.spawn(x.shape[0])
    noisy = np.empty_like(x)
    for n, child in enumerate(streams):
        noisy[n] = x[n] + child.normal(0.0, np.sqrt(p_noise[n]), x.shape[1])
    return noisy, mu


def measure_snr(reference: np.ndarray, residual: np.ndarray) -> float:
    """10*log10 of reference-to-residual power; +inf for a zero residual.

    Accepts real or complex arrays (power is the mean squared magnitude).
    """
    ref = np.asarray(reference).ravel()
    res = np.asarray(residual).ravel()
    if ref.size == 0 or ref.size != res.size:
        raise ValueError("reference and residual must be equal-length and non-empty")
    p_ref = np.mean(np.abs(ref) ** 2)
    if p_ref == 0:
        raise ValueError("reference power is zero; SNR undefined")
    p_res = np.mean(np.abs(res) ** 2)
    if p_res == 0:
        return float("inf")
    return float(10.0 * np.log10(p_ref / p_res))
