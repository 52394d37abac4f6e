"""Back-projection imaging and forward-projection inpainting.

Back-projection applies the conjugated kernel per (bin, frame) slice;
forward projection re-synthesizes channels from the grid image. Composing
the two collapses into a per-bin N x N channel filter (the Gram of the
kernel over grid points), which is the cheap path when N is much smaller
than the grid size: per frame it costs F*N^2 instead of F*N*J.

Every slice is a pure fixed-order reduction, so results do not depend on
how work is scheduled across bins or frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as _io
from .dsp import ComplexSpectrogram
from .errors import MemoryBudgetError
from .geometry import ImagingGrid
from .propagation import DEFAULT_MEMORY_BUDGET, PropagationOperator

INPAINT_MODES = ("image_path", "gram_path")
INPAINT_NORMS = ("none", "global", "diagonal")


@dataclass(frozen=True)
class RtmImage:
    """J x F x T complex image on the grid points."""

    data: np.ndarray
    grid: ImagingGrid

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError("image must be (grid, bins, frames)")
        if self.data.shape[0] != self.grid.n_points:
            raise ValueError("image grid axis does not match the grid")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("image contains non-finite entries")
        self.data.flags.writeable = False


@dataclass(frozen=True)
class GramFilter:
    """Per-bin N x N channel filter: G[f] = L[f] @ L[f]^H over grid points."""

    data: np.ndarray  # (F, N, N) complex

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[1] != self.data.shape[2]:
            raise ValueError("gram filter must be (F, N, N)")
        self.data.flags.writeable = False

    def diagonal(self) -> np.ndarray:
        """(F, N) real diagonal (own-channel power through the grid)."""
        return np.real(np.einsum("fnn->fn", self.data))


def _check_operator_input(op: PropagationOperator, spec: ComplexSpectrogram) -> None:
    f, n, _ = op.shape
    if spec.data.shape[0] != n or spec.data.shape[1] != f:
        raise ValueError(
            f"spectrogram ({spec.data.shape[0]} ch x {spec.data.shape[1]} bins) does not "
            f"match the operator ({n} ch x {f} bins)"
        )
    if spec.params != op.params:
        raise ValueError("spectrogram and operator were built with different analysis params")


def back_project(op: PropagationOperator, spec: ComplexSpectrogram) -> RtmImage:
    """Image the observed channels: M[j,f,t] = sum_n conj(L[f,n,j]) X[n,f,t]."""
    _check_operator_input(op, spec)
    n_bins, _, n_grid = op.shape
    out = np.empty((n_grid, n_bins, spec.n_frames), dtype=np.complex128)
    for f in range(n_bins):
        out[:, f, :] = op.tensor[f].conj().T @ spec.data[:, f, :]
    return RtmImage(data=out, grid=op.grid)


def forward_project(op: PropagationOperator, image: RtmImage) -> ComplexSpectrogram:
    """Re-synthesize channels: X[n,f,t] = sum_j L[f,n,j] M[j,f,t]."""
    n_bins, n_ch, n_grid = op.shape
    if image.data.shape[0] != n_grid or image.data.shape[1] != n_bins:
        raise ValueError("image dimensions do not match the operator")
    out = np.empty((n_ch, n_bins, image.data.shape[2]), dtype=np.complex128)
    for f in range(n_bins):
        out[:, f, :] = op.tensor[f] @ image.data[:, f, :]
    return ComplexSpectrogram(data=out, params=op.params, role="inpainted")


def gram_filter(op: PropagationOperator, max_bytes: int = DEFAULT_MEMORY_BUDGET) -> GramFilter:
    """Precompute the per-bin channel filter G[f] = L[f] @ L[f]^H."""
    n_bins, n_ch, _ = op.shape
    required = 16 * n_bins * n_ch * n_ch
    if required > max_bytes:
        raise MemoryBudgetError(required, max_bytes, what="gram filter")
    out = np.empty((n_bins, n_ch, n_ch), dtype=np.complex128)
    for f in range(n_bins):
        out[f] = op.tensor[f] @ op.tensor[f].conj().T
    return GramFilter(data=out)


def _apply_norm(data: np.ndarray, op: PropagationOperator, norm: str, gram_diag: np.ndarray) -> np.ndarray:
    if norm == "none":
        return data
    if norm == "global":
        return data / op.grid.n_points
    if norm == "diagonal":
        return data / gram_diag.T[:, :, None]  # (N, F, 1)
    raise ValueError(f"unknown normalization {norm!r}")


def operator_gram_diagonal(op: PropagationOperator) -> np.ndarray:
    """(F, N) sum_j |L[f,n,j]|^2 without forming the full gram filter."""
    return np.sum(np.abs(op.tensor) ** 2, axis=2)


def inpaint(
    observed: ComplexSpectrogram,
    op: PropagationOperator,
    mode: str = "gram_path",
    norm: str = "diagonal",
    gram: GramFilter | None = None,
) -> ComplexSpectrogram:
    """Reconstruct all channels through the grid (image out, project back).

    Both modes evaluate the same operator; ``gram_path`` contracts the grid
    axis once up front. ``diagonal`` normalization gives each channel unit
    response to its own contribution; ``global`` divides by the grid size;
    ``none`` leaves the raw projection scale.
    """
    if mode not in INPAINT_MODES:
        raise ValueError(f"unknown inpaint mode {mode!r}")
    if norm not in INPAINT_NORMS:
        raise ValueError(f"unknown normalization {norm!r}")
    _check_operator_input(op, observed)

    if mode == "image_path":
        projected = forward_project(op, back_project(op, observed))
        data = projected.data.copy()
        gram_diag = operator_gram_diagonal(op) if norm == "diagonal" else np.empty(0)
    else:
        g = gram if gram is not None else gram_filter(op)
        if g.data.shape[0] != op.shape[0] or g.data.shape[1] != op.shape[1]:
            raise ValueError("gram filter does not match the operator")
        n_bins = op.shape[0]
        data = np.empty_like(observed.data, dtype=np.complex128)
        for f in range(n_bins):
            data[:, f, :] = g.data[f] @ observed.data[:, f, :]
        gram_diag = g.diagonal() if norm == "diagonal" else np.empty(0)

    data = _apply_norm(data, op, norm, gram_diag)
    return ComplexSpectrogram(data=data, params=observed.params, role="inpainted")


def image_energy_map(image: RtmImage) -> np.ndarray:
    """(J,) total energy per grid point, summed over bins and frames."""
    return np.sum(np.abs(image.data) ** 2, axis=(1, 2))


def write_energy_map_csv(path: str | Path, image_or_map, grid: ImagingGrid | None = None,
                         header_comments: dict | None = None) -> None:
    """Energy map as (x, y, energy) rows for plotting."""
    if isinstance(image_or_map, RtmImage):
        energy = image_energy_map(image_or_map)
        grid = image_or_map.grid
    else:
        energy = np.asarray(image_or_map, dtype=float)
        if grid is None:
            raise ValueError("grid required when passing a bare energy vector")
    coords = grid.coords
    rows = [(float(coords[j, 0]), float(coords[j, 1]), float(energy[j])) for j in range(len(energy))]
    _io.write_csv(path, ["x", "y", "energy"], rows, header_comments=header_comments)
