"""Closed-form comparison systems: location-oracle delay-and-sum,
best-channel selection, sparse channel weighting, and channel swapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Position, SensorLayout, source_distances
from .propagation import SceneMetadata, SPEED_OF_SOUND

DAS_TAPS = 31
DAS_KAISER_BETA = 8.6


@dataclass(frozen=True)
class ChannelWeights:
    """Non-negative per-channel weights on the probability simplex."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty vector")
        if w.min() < 0:
            raise ValueError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)


def _fractional_advance(x: np.ndarray, frac: float, taps: int, beta: float) -> np.ndarray:
    """Interpolate x at t + frac (0 <= frac < 1) with a windowed sinc."""
    if frac == 0.0:
        return x.copy()
    half = taps // 2
    m = np.arange(-half, half + 1)
    h = np.sinc(m - frac) * np.kaiser(taps, beta)
    padded = np.pad(x, (half, half))
    # y[t] = sum_m h[m] * x[t + m]
    return np.correlate(padded, h, mode="valid")


def delay_and_sum(
    channels: np.ndarray,
    layout: SensorLayout,
    source_pos: Position,
    c: float = SPEED_OF_SOUND,
    sample_rate: int = 16000,
    amplitude_comp: bool = True,
    taps: int = DAS_TAPS,
    kaiser_beta: float = DAS_KAISER_BETA,
) -> np.ndarray:
    """Align channels to the known source position and average.

    Each channel is advanced by its propagation delay r_n / c using
    windowed-sinc fractional interpolation (integer rounding would destroy
    coherence at meter-scale geometry). ``amplitude_comp`` undoes the
    spherical spreading loss (x 4*pi*r_n) so distant channels do not
    dilute the average.
    """
    x = np.atleast_2d(np.asarray(channels, dtype=float))
    if x.shape[0] != layout.n_channels:
        raise ValueError("channel count does not match the layout")
    if c <= 0 or sample_rate <= 0:
        raise ValueError("speed of sound and sample rate must be positive")
    r = source_distances(layout, source_pos)
    delays = r / c * sample_rate
    n_samples = x.shape[1]
    acc = np.zeros(n_samples)
    for n in range(x.shape[0]):
        d_int = int(np.floor(delays[n]))
        d_frac = float(delays[n] - d_int)
        shifted = _fractional_advance(x[n], d_frac, taps, kaiser_beta)
        aligned = np.zeros(n_samples)
        src = shifted[d_int:]
        aligned[: src.size] = src[:n_samples]
        if amplitude_comp:
            aligned *= 4.0 * np.pi * r[n]
        acc += aligned
    return acc / x.shape[0]


def max_snr_select(channels: np.ndarray, meta: SceneMetadata) -> np.ndarray:
    """Return the channel with the highest recorded SNR (ties: lowest index)."""
    x = np.atleast_2d(np.asarray(channels, dtype=float))
    if meta.mu.size != x.shape[0]:
        raise ValueError("metadata SNR count does not match the channel count")
    return x[int(np.argmax(meta.mu))].copy()


def sparsemax(scores: np.ndarray) -> np.ndarray:
    """Euclidean projection of a score vector onto the probability simplex."""
    z = np.asarray(scores, dtype=float).ravel()
    if z.size == 0:
        raise ValueError("scores must be non-empty")
    z_sorted = np.sort(z)[::-1]
    cumsum = np.cumsum(z_sorted)
    ks = np.arange(1, z.size + 1)
    support = ks[1.0 + ks * z_sorted > cumsum]
    k_star = int(support[-1])
    threshold = (cumsum[k_star - 1] - 1.0) / k_star
    return np.maximum(z - threshold, 0.0)


def scaling_sparsemax(scores: np.ndarray, scale: float = 1.0) -> ChannelWeights:
    """Sparsemax of ``scale * scores``; larger scales sharpen the selection."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return ChannelWeights(sparsemax(scale * np.asarray(scores, dtype=float)))


def channel_swap(channels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Reorder the channel axis by a uniform random permutation."""
    x = np.atleast_2d(np.asarray(channels))
    return x[rng.permutation(x.shape[0])]
