"""Free-space wave propagation: the dense kernel tensor, scene synthesis,
and the channel degradation model.

The kernel is the analytic 3-D free-space point response
exp(i*k*r) / (4*pi*r), evaluated per STFT bin. The tensor is stored
frequency-major so each per-bin (N, J) slice is contiguous for the
migration matmuls.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as _io
from .dsp import StftParams, mix_at_snr, stft, istft
from .errors import DataError, MemoryBudgetError
from .geometry import ImagingGrid, Position, SensorLayout, distance_matrix, source_distances

SPEED_OF_SOUND = 343.0

DEFAULT_MEMORY_BUDGET = 6 << 30  # bytes; dense kernels get large fast

# Sources closer than this to a sensor are rejected by the synthesizer.
SOURCE_CLEARANCE = 0.5

DEGRADED_TAU_DEFAULT = -15.0


def wavenumber(f_hz: float, c: float = SPEED_OF_SOUND) -> float:
    """k = 2*pi*f / c in rad/m."""
    if c <= 0:
        raise ValueError("speed of sound must be positive")
    if f_hz < 0:
        raise ValueError("frequency must be non-negative")
    return 2.0 * math.pi * f_hz / c


def greens(k, r):
    """exp(i*k*r) / (4*pi*r); requires r strictly positive (callers clamp)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("propagation distance must be positive; clamp first")
    return np.exp(1j * np.asarray(k, dtype=float) * r) / (4.0 * np.pi * r)


@dataclass(frozen=True)
class PropagationOperator:
    """Dense F x N x J kernel tensor with its generating geometry."""

    tensor: np.ndarray  # complex128, (F, N, J)
    params: StftParams
    c: float
    layout: SensorLayout
    grid: ImagingGrid
    r_min: float

    def __post_init__(self):
        f, n, j = self.tensor.shape
        if f != self.params.n_bins or n != self.layout.n_channels or j != self.grid.n_points:
            raise ValueError("operator tensor shape does not match its geometry")
        self.tensor.flags.writeable = False

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.tensor.shape

    def freqs(self) -> np.ndarray:
        return self.params.freqs()


def operator_bytes(params: StftParams, layout: SensorLayout, grid: ImagingGrid) -> int:
    return 16 * params.n_bins * layout.n_channels * grid.n_points


def build_operator(
    layout: SensorLayout,
    grid: ImagingGrid,
    params: StftParams,
    c: float = SPEED_OF_SOUND,
    max_bytes: int = DEFAULT_MEMORY_BUDGET,
) -> PropagationOperator:
    """Evaluate the kernel over every (bin, sensor, grid point) triple."""
    if c <= 0:
        raise ValueError("speed of sound must be positive")
    required = operator_bytes(params, layout, grid)
    if required > max_bytes:
        raise MemoryBudgetError(required, max_bytes, what="propagation operator")
    dm = distance_matrix(layout, grid)
    k = 2.0 * math.pi * params.freqs() / c  # wavenumber() semantics, vectorized
    tensor = np.exp(1j * k[:, None, None] * dm.r[None, :, :]) / (4.0 * np.pi * dm.r[None, :, :])
    return PropagationOperator(
        tensor=tensor, params=params, c=c, layout=layout, grid=grid, r_min=dm.r_min
    )


@dataclass(frozen=True)
class SceneMetadata:
    """Ground truth of one synthesized scene."""

    source_position: Position
    mu: np.ndarray  # (N,) per-channel SNR in dB
    tau: float
    clip_id: str = ""
    layout_kind: str = ""
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.mu, dtype=float)
        m.flags.writeable = False
        object.__setattr__(self, "mu", m)

    @property
    def degraded_set(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.mu < self.tau))

    @property
    def reliable_set(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.mu >= self.tau))

    def to_dict(self) -> dict:
        return {
            "source_position": [self.source_position.x, self.source_position.y, self.source_position.z],
            "mu_db": [float(v) for v in self.mu],
            "tau_db": float(self.tau),
            "clip_id": self.clip_id,
            "layout_kind": self.layout_kind,
            "label": self.label,
            "degraded_set": list(self.degraded_set),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneMetadata":
        return cls(
            source_position=Position(*doc["source_position"]),
            mu=np.asarray(doc["mu_db"], dtype=float),
            tau=float(doc["tau_db"]),
            clip_id=doc.get("clip_id", ""),
            layout_kind=doc.get("layout_kind", ""),
            label=doc.get("label", ""),
        )


def simulate_scene(
    source: np.ndarray,
    source_pos: Position,
    layout: SensorLayout,
    params: StftParams,
    c: float = SPEED_OF_SOUND,
    mode: str = "stft_bin",
    attenuation: bool = True,
    clearance: float = SOURCE_CLEARANCE,
) -> np.ndarray:
    """Propagate a mono source to every sensor; returns (N, S + max delay).

    ``stft_bin`` multiplies each STFT bin by the point-source kernel (the
    exact forward model the migration inverts). ``exact`` applies the true
    fractional delay and spreading loss by filtering the full spectrum,
    and serves as the physically timed cross-check.
    """
    x = np.asarray(source, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("source signal is empty")
    r = source_distances(layout, source_pos)
    if r.min() < clearance:
        raise ValueError(
            f"source is {r.min():.3g} m from a sensor; minimum clearance is {clearance} m"
        )
    d_max = int(math.ceil(r.max() / c * params.sample_rate))
    n_out = x.size + d_max

    if mode == "exact":
        spectrum = np.fft.rfft(x, n=n_out)
        f_hz = np.fft.rfftfreq(n_out, d=1.0 / params.sample_rate)
        tau = r / c
        # plain-FFT convention here: a delay is exp(-i*2*pi*f*tau)
        h = np.exp(-2j * np.pi * f_hz[None, :] * tau[:, None])
        if attenuation:
            h = h / (4.0 * np.pi * r[:, None])
        return np.fft.irfft(spectrum[None, :] * h, n=n_out, axis=1)

    if mode == "stft_bin":
        # Guard padding on both sides: synthesizing a modified spectrogram
        # leaves partial-overlap artifacts in the outermost window; those
        # land in the padding and are sliced away.
        guard = params.window_length
        padded = np.zeros(guard + n_out + guard)
        padded[guard : guard + x.size] = x
        spec = stft(padded, params)
        k = 2.0 * math.pi * params.freqs() / c
        h = np.exp(1j * k[:, None] * r[None, :]).T  # (N, F)
        if attenuation:
            h = h / (4.0 * np.pi * r[:, None])
        channels = spec.data * h[:, :, None]
        y = istft(spec.with_data(channels, role="clean"), params)
        if y.shape[1] < guard + n_out:
            y = np.pad(y, ((0, 0), (0, guard + n_out - y.shape[1])))
        return np.ascontiguousarray(y[:, guard : guard + n_out])

    raise ValueError(f"unknown synthesis mode {mode!r}")


def degrade(
    clean: np.ndarray,
    rng: np.random.Generator,
    snr_low: float = -30.0,
    snr_high: float = 0.0,
    tau: float = DEGRADED_TAU_DEFAULT,
    source_position: Position | None = None,
    clip_id: str = "",
    layout_kind: str = "",
    label: str = "",
) -> tuple[np.ndarray, SceneMetadata]:
    """Draw per-channel SNRs uniformly and add white noise accordingly."""
    if snr_low > snr_high:
        raise ValueError("snr_low must not exceed snr_high")
    x = np.atleast_2d(np.asarray(clean, dtype=float))
    mu = rng.uniform(snr_low, snr_high, size=x.shape[0])
    noisy, mu = mix_at_snr(x, rng, mu)
    meta = SceneMetadata(
        source_position=source_position or Position(0.0, 0.0, 0.0),
        mu=mu,
        tau=tau,
        clip_id=clip_id,
        layout_kind=layout_kind,
        label=label,
    )
    return noisy, meta


# -- operator cache ----------------------------------------------------------


def _geometry_digest(layout: SensorLayout, grid: ImagingGrid) -> tuple[str, str]:
    lh = hashlib.sha256(layout.kind.encode() + layout.coords.tobytes()).hexdigest()
    gh = hashlib.sha256(
        json.dumps([list(grid.extent), grid.spacing]).encode()
    ).hexdigest()
    return lh, gh


def save_operator(path: str | Path, op: PropagationOperator) -> None:
    lh, gh = _geometry_digest(op.layout, op.grid)
    meta = {
        "layout_sha256": lh,
        "grid_sha256": gh,
        "stft": [op.params.sample_rate, op.params.window_length, op.params.hop, op.params.fft_size],
        "c": op.c,
        "r_min": op.r_min,
    }
    _io.write_tensor(path, op.tensor, axes=["freq", "channel", "grid"], meta=meta)


def load_operator(
    path: str | Path,
    layout: SensorLayout,
    grid: ImagingGrid,
    params: StftParams,
    c: float = SPEED_OF_SOUND,
) -> PropagationOperator:
    """Load a cached kernel, verifying it was built for this geometry."""
    tensor, header = _io.read_tensor(path)
    meta = header.get("meta", {})
    lh, gh = _geometry_digest(layout, grid)
    expected = {
        "layout_sha256": lh,
        "grid_sha256": gh,
        "stft": [params.sample_rate, params.window_length, params.hop, params.fft_size],
        "c": c,
    }
    for key, want in expected.items():
        if meta.get(key) != want:
            raise DataError(f"operator cache {path} mismatch on {key}: {meta.get(key)} != {want}")
    return PropagationOperator(
        tensor=np.ascontiguousarray(tensor),
        params=params,
        c=c,
        layout=layout,
        grid=grid,
        r_min=float(meta.get("r_min", 0.5 * grid.spacing)),
    )
