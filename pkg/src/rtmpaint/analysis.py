"""Feature-space machinery: patch tokens, channel contribution weights,
correlation reports, and a deterministic reference classifier.

The classifier is intentionally simple (nearest centroid on mean-pooled
tokens). It supports directional comparisons between pipeline variants at
desk scale; it is not a stand-in for a trained transformer's accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import LogMelFeature
from .errors import ConstantInputError
from .geometry import SensorLayout, source_distances
from .propagation import SceneMetadata

PATCH_MEL = 16
PATCH_FRAMES = 16
PATCH_STRIDE = 10
TOKEN_DIM = 64


@dataclass(frozen=True)
class PatchGrid:
    """N x I x (K_p*T_p) vectorized patches plus the tiling geometry."""

    patches: np.ndarray
    patch_mel: int
    patch_frames: int
    stride_mel: int
    stride_frames: int
    n_mel_positions: int
    n_frame_positions: int

    def __post_init__(self):
        n, i, d = self.patches.shape
        if i != self.n_mel_positions * self.n_frame_positions:
            raise ValueError("patch count does not match the tiling")
        if d != self.patch_mel * self.patch_frames:
            raise ValueError("patch vector length does not match the patch size")
        self.patches.flags.writeable = False

    @property
    def n_patches(self) -> int:
        return self.patches.shape[1]


@dataclass(frozen=True)
class TokenSet:
    """Per-channel tokens (N x I x D) and their channel average (I x D)."""

    tokens: np.ndarray
    averaged: np.ndarray

    def __post_init__(self):
        if self.tokens.ndim != 3 or self.averaged.shape != self.tokens.shape[1:]:
            raise ValueError("token shapes are inconsistent")
        self.tokens.flags.writeable = False
        self.averaged.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.tokens.shape[2]


@dataclass(frozen=True)
class SpatialWeights:
    """Softmax channel-contribution weights; sums to 1."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.min() < 0 or w.max() > 1 or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("spatial weights must lie in [0, 1] and sum to 1")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)


def extract_patches(
    feature: LogMelFeature,
    patch_mel: int = PATCH_MEL,
    patch_frames: int = PATCH_FRAMES,
    stride_mel: int = PATCH_STRIDE,
    stride_frames: int = PATCH_STRIDE,
) -> PatchGrid:
    """Tile the (mel, frame) plane with fixed-stride patches.

    Patch index runs row-major over (mel position, frame position); each
    patch vector is the C-order flattening of its (K_p, T_p) block, i.e.
    mel-major. Every channel is tiled identically.
    """
    e = feature.data
    _, n_mel, n_frames = e.shape
    if patch_mel > n_mel or patch_frames > n_frames:
        raise ValueError("patch does not fit inside the feature plane")
    mel_starts = np.arange(0, n_mel - patch_mel + 1, stride_mel)
    frame_starts = np.arange(0, n_frames - patch_frames + 1, stride_frames)
    blocks = [
        e[:, k0 : k0 + patch_mel, t0 : t0 + patch_frames].reshape(e.shape[0], -1)
        for k0 in mel_starts
        for t0 in frame_starts
    ]
    patches = np.stack(blocks, axis=1)
    return PatchGrid(
        patches=patches,
        patch_mel=patch_mel,
        patch_frames=patch_frames,
        stride_mel=stride_mel,
        stride_frames=stride_frames,
        n_mel_positions=len(mel_starts),
        n_frame_positions=len(frame_starts),
    )


def make_embedding(
    patch_dim: int, token_dim: int = TOKEN_DIM, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Gaussian projection (std 1/sqrt(patch_dim)) and zero bias.

    A learning-free stand-in for a trained patch embedding; with it the
    weight machinery is exercisable without any training loop.
    """
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1.0 / np.sqrt(patch_dim), size=(patch_dim, token_dim))
    return w, np.zeros(token_dim)


def embed_patches(grid: PatchGrid, w_emb: np.ndarray, b_emb: np.ndarray) -> TokenSet:
    """Linear patch-to-token map plus the channel-average token sequence."""
    if w_emb.shape[0] != grid.patches.shape[2] or w_emb.shape[1] != b_emb.shape[0]:
        raise ValueError("embedding shapes do not match the patches")
    tokens = grid.patches @ w_emb + b_emb
    return TokenSet(tokens=tokens, averaged=tokens.mean(axis=0))


def spatial_weights(tokens: TokenSet) -> SpatialWeights:
    """Patch-averaged softmax similarity of each channel to the mean token."""
    t = tokens.tokens  # (N, I, D)
    scores = np.einsum("id,nid->ni", tokens.averaged, t) / np.sqrt(tokens.dim)
    scores -= scores.max(axis=0, keepdims=True)
    expd = np.exp(scores)
    per_patch = expd / expd.sum(axis=0, keepdims=True)  # (N, I)
    w = per_patch.mean(axis=1)
    return SpatialWeights(w / w.sum())


def pearson(x, y) -> float:
    """Product-moment correlation; rejects constant inputs."""
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(y, dtype=float).ravel()
    if a.size != b.size or a.size < 2:
        raise ValueError("need two equal-length sequences of length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(np.sum(da**2))
    nb = np.sqrt(np.sum(db**2))
    if na == 0 or nb == 0:
        raise ConstantInputError("correlation undefined for a constant sequence")
    return float(np.sum(da * db) / (na * nb))


def correlation_report(
    weights: SpatialWeights, meta: SceneMetadata, layout: SensorLayout
) -> dict:
    """Correlate channel weights with per-channel SNR and source distance."""
    if weights.w.size != meta.mu.size or weights.w.size != layout.n_channels:
        raise ValueError("weights, metadata, and layout disagree on channel count")
    dist = source_distances(layout, meta.source_position)
    return {
        "corr_snr": pearson(weights.w, meta.mu),
        "corr_distance": pearson(weights.w, dist),
    }


@dataclass(frozen=True)
class CentroidModel:
    """Per-class mean vectors in token space."""

    labels: tuple[str, ...]
    centroids: np.ndarray  # (C, D)

    def __post_init__(self):
        self.centroids.flags.writeable = False


def _pool(feature: np.ndarray) -> np.ndarray:
    f = np.asarray(feature, dtype=float)
    if f.ndim == 1:
        return f
    if f.ndim == 2:  # (I, D) token sequence
        return f.mean(axis=0)
    raise ValueError("feature must be a vector or an (I, D) sequence")


def reference_classifier_train(examples: list[tuple[np.ndarray, str]]) -> CentroidModel:
    """Nearest-centroid model over mean-pooled features."""
    by_label: dict[str, list[np.ndarray]] = {}
    for feature, label in examples:
        by_label.setdefault(str(label), []).append(_pool(feature))
    if len(by_label) < 2:
        raise ValueError("need at least two classes")
    labels = tuple(sorted(by_label))
    centroids = np.stack([np.mean(by_label[l], axis=0) for l in labels])
    return CentroidModel(labels=labels, centroids=centroids)


def reference_classifier_predict(model: CentroidModel, feature: np.ndarray) -> str:
    v = _pool(feature)
    d = np.sum((model.centroids - v[None, :]) ** 2, axis=1)
    return model.labels[int(np.argmin(d))]


def evaluate(predictions: list[str], truth: list[str]) -> dict:
    """Accuracy percentage and a truth-by-prediction confusion matrix."""
    if len(predictions) != len(truth):
        raise ValueError("prediction and truth lengths differ")
    if not truth:
        raise ValueError("cannot evaluate an empty set")
    labels = sorted(set(truth) | set(predictions))
    index = {l: i for i, l in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=int)
    correct = 0
    for p, t in zip(predictions, truth):
        confusion[index[t], index[p]] += 1
        correct += int(p == t)
    return {
        "accuracy_percent": 100.0 * correct / len(truth),
        "labels": labels,
        "confusion": confusion,
    }
