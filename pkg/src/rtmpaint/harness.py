"""End-to-end experiment orchestration: dataset synthesis, pipeline
variants, metrics, and plot-data emission.

Every artifact embeds the config hash and master seed, and every clip
draws from its own seed-derived stream, so reruns with the same config
and seed are byte-identical regardless of worker count or scheduling.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from . import io as _io
from .analysis import (
    PATCH_FRAMES,
    PATCH_MEL,
    PATCH_STRIDE,
    TOKEN_DIM,
    embed_patches,
    evaluate,
    extract_patches,
    make_embedding,
    correlation_report,
    reference_classifier_predict,
    reference_classifier_train,
    spatial_weights,
)
from .baselines import delay_and_sum, max_snr_select
from .dsp import LogMelFeature, StftParams, istft, log_mel, measure_snr, mel_filterbank, stft
from .errors import ConfigError, ConstantInputError, DataError
from .geometry import (
    ImagingGrid,
    Position,
    SensorLayout,
    default_anchor,
    make_layout,
    source_distances,
)
from .propagation import (
    SceneMetadata,
    SOURCE_CLEARANCE,
    build_operator,
    degrade,
    simulate_scene,
)
from .rtm import GramFilter, gram_filter, inpaint

VARIANTS = ("raw", "inpaint", "beamform_oracle", "maxsnr_oracle")
SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a full sweep needs; JSON-serializable and hashable."""

    seed: int
    layouts: tuple[str, ...] = ("circular", "linear", "right_angle")
    n_channels: int = 50
    spacing: float = 1.0
    extent: tuple[float, float, float, float] = (0.0, 50.0, 0.0, 50.0)
    grid_spacing: float = 1.0
    snr_low: float = -30.0
    snr_high: float = 0.0
    tau: float = -15.0
    c: float = 343.0
    sample_rate: int = 16000
    window_length: int = 400
    hop: int = 160
    fft_size: int = 512
    n_mels: int = 128
    patch_mel: int = PATCH_MEL
    patch_frames: int = PATCH_FRAMES
    patch_stride: int = PATCH_STRIDE
    token_dim: int = TOKEN_DIM
    clip_seconds: float = 1.0
    synthesis_mode: str = "stft_bin"
    attenuation: bool = True
    variants: tuple[str, ...] = VARIANTS
    inpaint_mode: str = "gram_path"
    inpaint_norm: str = "diagonal"
    amplitude_comp: bool = True
    sparsemax_scale: float = 1.0
    workers: int = 1
    manifest_path: str = ""
    output_dir: str = ""

    def stft_params(self) -> StftParams:
        return StftParams(self.sample_rate, self.window_length, self.hop, self.fft_size)

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "layouts": list(self.layouts),
            "n_channels": self.n_channels,
            "spacing": self.spacing,
            "extent": list(self.extent),
            "grid_spacing": self.grid_spacing,
            "snr_low": self.snr_low,
            "snr_high": self.snr_high,
            "tau": self.tau,
            "c": self.c,
            "sample_rate": self.sample_rate,
            "window_length": self.window_length,
            "hop": self.hop,
            "fft_size": self.fft_size,
            "n_mels": self.n_mels,
            "patch_mel": self.patch_mel,
            "patch_frames": self.patch_frames,
            "patch_stride": self.patch_stride,
            "token_dim": self.token_dim,
            "clip_seconds": self.clip_seconds,
            "synthesis_mode": self.synthesis_mode,
            "attenuation": self.attenuation,
            "variants": list(self.variants),
            "inpaint_mode": self.inpaint_mode,
            "inpaint_norm": self.inpaint_norm,
            "amplitude_comp": self.amplitude_comp,
            "sparsemax_scale": self.sparsemax_scale,
            "workers": self.workers,
            "manifest_path": self.manifest_path,
            "output_dir": self.output_dir,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in known:
            raise ConfigError("config requires a seed")
        for tup in ("layouts", "variants", "extent"):
            if tup in known:
                known[tup] = tuple(known[tup])
        try:
            cfg = cls(**known)
            cfg.validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    def validate(self) -> None:
        if self.n_channels < 1:
            raise ConfigError("n_channels must be >= 1")
        if self.snr_low > self.snr_high:
            raise ConfigError("snr_low must not exceed snr_high")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ConfigError(f"unknown variants {bad}; choose from {VARIANTS}")
        for kind in self.layouts:
            if kind not in ("circular", "linear", "right_angle"):
                raise ConfigError(f"unknown layout kind {kind!r}")
        self.stft_params()  # raises on bad analysis params

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")  # where results land does not change what they are
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def provenance(self) -> dict:
        return {"config_hash": self.config_hash(), "seed": self.seed, "schema": SCHEMA_VERSION}


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(doc)


def save_config(path: str | Path, config: ExperimentConfig) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class ClipManifest:
    """Clip inventory: id, source audio path, class label, fold index."""

    rows: tuple[dict, ...]

    def __post_init__(self):
        ids = [r["clip_id"] for r in self.rows]
        if len(ids) != len(set(ids)):
            raise ConfigError("manifest clip ids must be unique")

    @property
    def folds(self) -> list[int]:
        return sorted({int(r["fold"]) for r in self.rows})

    @property
    def labels(self) -> list[str]:
        return sorted({r["label"] for r in self.rows})

    @classmethod
    def load(cls, path: str | Path) -> "ClipManifest":
        try:
            columns, rows, _ = _io.read_csv(path)
        except FileNotFoundError as exc:
            raise ConfigError(f"manifest not found: {path}") from exc
        required = {"clip_id", "path", "label", "fold"}
        if not required.issubset(columns):
            raise ConfigError(f"manifest needs columns {sorted(required)}, got {columns}")
        base = Path(path).parent
        resolved = []
        for r in rows:
            p = Path(r["path"])
            if not p.is_absolute():
                p = base / p
            resolved.append(
                {"clip_id": r["clip_id"], "path": str(p), "label": r["label"], "fold": int(r["fold"])}
            )
        resolved.sort(key=lambda r: r["clip_id"])
        return cls(rows=tuple(resolved))

    def save(self, path: str | Path) -> None:
        _io.write_csv(
            path,
            ["clip_id", "path", "label", "fold"],
            [(r["clip_id"], r["path"], r["label"], r["fold"]) for r in self.rows],
        )


# -- synthetic corpus --------------------------------------------------------

CORPUS_CLASSES = (
    "band_low",
    "band_mid",
    "band_high",
    "harmonic",
    "chirp_up",
    "chirp_down",
    "am_noise",
    "pulses",
)


def _corpus_clip(label: str, rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    if label.startswith("band_"):
        lo, hi = {"band_low": (150, 500), "band_mid": (900, 2200), "band_high": (3500, 6500)}[label]
        spec = np.fft.rfft(rng.standard_normal(n))
        f = np.fft.rfftfreq(n, 1 / sr)
        spec[(f < lo) | (f > hi)] = 0.0
        x = np.fft.irfft(spec, n=n)
    elif label == "harmonic":
        f0 = rng.uniform(180, 260)
        x = sum(np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi)) / h for h in range(1, 6))
    elif label == "chirp_up":
        x = np.sin(2 * np.pi * (300 * t + (4500 - 300) / (2 * t[-1]) * t**2))
    elif label == "chirp_down":
        x = np.sin(2 * np.pi * (4500 * t - (4500 - 300) / (2 * t[-1]) * t**2))
    elif label == "am_noise":
        x = rng.standard_normal(n) * (1 + np.sin(2 * np.pi * rng.uniform(6, 10) * t)) / 2
    elif label == "pulses":
        x = np.zeros(n)
        period = int(sr / rng.uniform(18, 25))
        x[:: max(period, 1)] = 1.0
        x = np.convolve(x, np.hanning(64), mode="same")
    else:
        raise ValueError(f"unknown corpus class {label!r}")
    rms = np.sqrt(np.mean(x**2))
    return x / max(rms, 1e-12)


def make_synthetic_corpus(
    directory: str | Path,
    n_classes: int = 8,
    clips_per_class: int = 10,
    n_folds: int = 2,
    duration: float = 1.0,
    sample_rate: int = 16000,
    seed: int = 0,
) -> Path:
    """Write a small labeled mono WAV corpus plus its manifest; returns the
    manifest path. Handy for tests and demos; any external corpus with the
    same manifest schema works identically."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not (1 <= n_classes <= len(CORPUS_CLASSES)):
        raise ConfigError(f"n_classes must be in [1, {len(CORPUS_CLASSES)}]")
    n = int(round(duration * sample_rate))
    rows = []
    for ci, label in enumerate(CORPUS_CLASSES[:n_classes]):
        for k in range(clips_per_class):
            rng = np.random.default_rng([seed, ci, k])
            x = _corpus_clip(label, rng, n, sample_rate)
            clip_id = f"{label}_{k:03d}"
            wav = f"{clip_id}.wav"
            _io.write_wav(directory / wav, x, sample_rate)
            rows.append((clip_id, wav, label, k % n_folds))
    manifest = directory / "manifest.csv"
    _io.write_csv(manifest, ["clip_id", "path", "label", "fold"], rows)
    return manifest


# -- dataset synthesis -------------------------------------------------------


def build_layouts(config: ExperimentConfig) -> dict[str, SensorLayout]:
    return {
        kind: make_layout(kind, config.n_channels, config.spacing, default_anchor(kind, config.extent))
        for kind in config.layouts
    }


def imaging_grid(config: ExperimentConfig) -> ImagingGrid:
    return ImagingGrid(extent=config.extent, spacing=config.grid_spacing)


def _load_source(path: str, sample_rate: int, n_target: int) -> np.ndarray:
    x, rate = _io.read_wav(path)
    if x.shape[0] != 1:
        raise DataError(f"source audio must be mono: {path} has {x.shape[0]} channels")
    x = x[0]
    if rate != sample_rate:
        g = math.gcd(rate, sample_rate)
        x = resample_poly(x, sample_rate // g, rate // g)
    if x.size == 0:
        raise DataError(f"source audio is empty: {path}")
    if x.size < n_target:  # tile short clips instead of padding with silence
        x = np.tile(x, int(np.ceil(n_target / x.size)))
    x = x[:n_target]
    rms = np.sqrt(np.mean(x**2))
    if rms == 0:
        raise DataError(f"source audio is silent: {path}")
    return x / rms


def sample_clear_position(
    rng: np.random.Generator,
    extent,
    layout: SensorLayout,
    clearance: float = SOURCE_CLEARANCE,
    max_tries: int = 1000,
) -> Position:
    """Uniform field position at least ``clearance`` from every sensor."""
    for _ in range(max_tries):
        x_min, x_max, y_min, y_max = extent
        pos = Position(float(rng.uniform(x_min, x_max)), float(rng.uniform(y_min, y_max)), 0.0)
        if source_distances(layout, pos).min() >= clearance:
            return pos
    raise DataError("could not place a source away from all sensors")


def synthesize_scene(
    config: ExperimentConfig,
    layout: SensorLayout,
    source: np.ndarray,
    rng: np.random.Generator,
    clip_id: str,
    label: str,
) -> tuple[np.ndarray, np.ndarray, SceneMetadata]:
    """One clip through one layout: returns (clean, noisy, metadata)."""
    pos = sample_clear_position(rng, config.extent, layout)
    clean = simulate_scene(
        source,
        pos,
        layout,
        config.stft_params(),
        c=config.c,
        mode=config.synthesis_mode,
        attenuation=config.attenuation,
    )
    noisy, meta = degrade(
        clean,
        rng,
        snr_low=config.snr_low,
        snr_high=config.snr_high,
        tau=config.tau,
        source_position=pos,
        clip_id=clip_id,
        layout_kind=layout.kind,
        label=label,
    )
    return clean, noisy, meta


def synthesize_dataset(
    config: ExperimentConfig, manifest: ClipManifest, dataset_dir: str | Path
) -> Path:
    """Materialize every (layout, clip) scene under ``dataset_dir``."""
    dataset_dir = _ensure(Path(dataset_dir))
    layouts = build_layouts(config)
    save_config(dataset_dir / "config.json", config)
    manifest.save(dataset_dir / "manifest.csv")

    def one(args) -> None:
        li, kind, ci, row = args
        layout = layouts[kind]
        rng = np.random.default_rng([config.seed, li + 1, ci])
        source = _load_source(
            row["path"], config.sample_rate, int(round(config.clip_seconds * config.sample_rate))
        )
        clean, noisy, meta = synthesize_scene(config, layout, source, rng, row["clip_id"], row["label"])
        scene_dir = dataset_dir / "scenes" / kind
        scene_dir.mkdir(parents=True, exist_ok=True)
        _io.write_wav(scene_dir / f"{row['clip_id']}.clean.wav", clean, config.sample_rate)
        _io.write_wav(scene_dir / f"{row['clip_id']}.noisy.wav", noisy, config.sample_rate)
        doc = meta.to_dict()
        doc["fold"] = row["fold"]
        doc.update(config.provenance())
        (scene_dir / f"{row['clip_id']}.meta.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )

    jobs = [
        (li, kind, ci, row)
        for li, kind in enumerate(config.layouts)
        for ci, row in enumerate(manifest.rows)
    ]
    for kind in config.layouts:
        (dataset_dir / "scenes" / kind).mkdir(parents=True, exist_ok=True)
    if config.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(one, jobs))
    else:
        for job in jobs:
            one(job)
    return dataset_dir


def _ensure(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_scene(dataset_dir: str | Path, kind: str, clip_id: str):
    """Returns (clean, noisy, metadata dict) for one stored scene."""
    scene_dir = Path(dataset_dir) / "scenes" / kind
    meta_path = scene_dir / f"{clip_id}.meta.json"
    if not meta_path.exists():
        raise DataError(f"scene not found: {meta_path}")
    doc = json.loads(meta_path.read_text())
    clean, _ = _io.read_wav(scene_dir / f"{clip_id}.clean.wav")
    noisy, _ = _io.read_wav(scene_dir / f"{clip_id}.noisy.wav")
    return clean, noisy, doc


# -- feature pipeline --------------------------------------------------------


@dataclass
class LayoutResources:
    """Per-layout precomputed state shared by every clip."""

    layout: SensorLayout
    gram: GramFilter | None = None


def prepare_resources(config: ExperimentConfig, need_inpaint: bool) -> dict[str, "LayoutResources"]:
    layouts = build_layouts(config)
    grid = imaging_grid(config)
    out = {}
    for kind, layout in layouts.items():
        gram = None
        if need_inpaint:
            op = build_operator(layout, grid, config.stft_params(), c=config.c)
            gram = gram_filter(op)
            del op
        out[kind] = LayoutResources(layout=layout, gram=gram)
    return out


@dataclass
class SceneFeatures:
    """Per-variant pooled feature vectors and analysis stats for one scene."""

    clip_id: str
    label: str
    fold: int
    layout_kind: str
    pooled: dict[str, np.ndarray]
    weights: dict[str, np.ndarray]
    correlations: dict[str, dict]
    snr_raw_db: np.ndarray
    snr_inpainted_db: np.ndarray | None
    degraded_set: tuple[int, ...] = ()


def _tokens_from_logmel(feature: LogMelFeature, config: ExperimentConfig, w_emb, b_emb):
    # Clip-level input normalization (transformer-frontend style): remove
    # the clip's grand log level so source distance and overall gain do not
    # dominate the token geometry.
    centered = LogMelFeature(feature.data - feature.data.mean())
    patches = extract_patches(
        centered,
        patch_mel=config.patch_mel,
        patch_frames=config.patch_frames,
        stride_mel=config.patch_stride,
        stride_frames=config.patch_stride,
    )
    return embed_patches(patches, w_emb, b_emb)


def featurize_scene(
    config: ExperimentConfig,
    resources: LayoutResources,
    clean: np.ndarray,
    noisy: np.ndarray,
    meta: SceneMetadata,
    fold: int,
    bank,
    w_emb: np.ndarray,
    b_emb: np.ndarray,
) -> SceneFeatures:
    """Run every configured variant over one scene."""
    params = config.stft_params()
    layout = resources.layout
    spec_noisy = stft(noisy, params)

    # SNRs are measured on interior samples: synthesis edges carry partial
    # window coverage, not channel content.
    trim = params.window_length
    snr_raw = np.array(
        [
            measure_snr(clean[n, trim:-trim], noisy[n, trim:-trim] - clean[n, trim:-trim])
            for n in range(clean.shape[0])
        ]
    )

    pooled: dict[str, np.ndarray] = {}
    weights: dict[str, np.ndarray] = {}
    correlations: dict[str, dict] = {}
    snr_inp = None

    for variant in config.variants:
        if variant == "raw":
            feats = log_mel(spec_noisy, bank)
            tokens = _tokens_from_logmel(feats, config, w_emb, b_emb)
        elif variant == "inpaint":
            if resources.gram is None:
                raise DataError("inpaint variant requested but no gram filter was prepared")
            grid = imaging_grid(config)
            spec_clean = stft(clean, params, role="clean")
            inpainted = _gram_inpaint(spec_noisy, resources.gram, config, grid)
            inpainted_clean = _gram_inpaint(spec_clean, resources.gram, config, grid)
            y_inp = istft(inpainted, params)[:, trim:-trim]
            y_inp_clean = istft(inpainted_clean, params)[:, trim:-trim]
            snr_inp = np.array(
                [
                    measure_snr(y_inp_clean[n], y_inp[n] - y_inp_clean[n])
                    for n in range(y_inp.shape[0])
                ]
            )
            feats = log_mel(inpainted, bank)
            tokens = _tokens_from_logmel(feats, config, w_emb, b_emb)
        elif variant == "beamform_oracle":
            mono = delay_and_sum(
                noisy,
                layout,
                meta.source_position,
                c=config.c,
                sample_rate=config.sample_rate,
                amplitude_comp=config.amplitude_comp,
            )
            tokens = _tokens_from_logmel(log_mel(stft(mono, params), bank), config, w_emb, b_emb)
        elif variant == "maxsnr_oracle":
            mono = max_snr_select(noisy, meta)
            tokens = _tokens_from_logmel(log_mel(stft(mono, params), bank), config, w_emb, b_emb)
        else:  # config.validate() makes this unreachable
            raise ConfigError(f"unknown variant {variant!r}")

        pooled[variant] = tokens.averaged.mean(axis=0)
        if variant in ("raw", "inpaint"):
            sw = spatial_weights(tokens)
            weights[variant] = sw.w
            try:
                correlations[variant] = correlation_report(sw, meta, layout)
            except ConstantInputError:
                correlations[variant] = {"corr_snr": float("nan"), "corr_distance": float("nan")}

    return SceneFeatures(
        clip_id=meta.clip_id,
        label=meta.label,
        fold=fold,
        layout_kind=layout.kind,
        pooled=pooled,
        weights=weights,
        correlations=correlations,
        snr_raw_db=snr_raw,
        snr_inpainted_db=snr_inp,
        degraded_set=meta.degraded_set,
    )


def _gram_inpaint(spec, gram: GramFilter, config: ExperimentConfig, grid: ImagingGrid):
    """Gram-path inpainting without materializing the dense operator."""
    data = np.empty_like(spec.data, dtype=np.complex128)
    for f in range(spec.data.shape[1]):
        data[:, f, :] = gram.data[f] @ spec.data[:, f, :]
    if config.inpaint_norm == "diagonal":
        data /= gram.diagonal().T[:, :, None]
    elif config.inpaint_norm == "global":
        data /= grid.n_points
    return spec.with_data(data, role="inpainted")


# -- pipeline ----------------------------------------------------------------


def run_pipeline(config: ExperimentConfig, dataset_dir: str | Path, results_dir: str | Path) -> Path:
    """Featurize every scene, train/evaluate per layout pair, write CSVs."""
    dataset_dir = Path(dataset_dir)
    results_dir = _ensure(Path(results_dir))
    stored = dataset_dir / "config.json"
    if not stored.exists():
        raise DataError(f"dataset has no config.json: {dataset_dir}")
    ds_config = ExperimentConfig.from_dict(json.loads(stored.read_text()))
    if ds_config.config_hash() != config.config_hash():
        raise DataError("dataset was synthesized with a different config")
    manifest = ClipManifest.load(dataset_dir / "manifest.csv")

    params = config.stft_params()
    bank = mel_filterbank(params, n_mels=config.n_mels)
    w_emb, b_emb = make_embedding(
        config.patch_mel * config.patch_frames, config.token_dim, seed=config.seed
    )
    resources = prepare_resources(config, need_inpaint="inpaint" in config.variants)

    def one(args) -> SceneFeatures:
        kind, row = args
        clean, noisy, doc = load_scene(dataset_dir, kind, row["clip_id"])
        meta = SceneMetadata.from_dict(doc)
        return featurize_scene(
            config, resources[kind], clean, noisy, meta, int(row["fold"]), bank, w_emb, b_emb
        )

    jobs = [(kind, row) for kind in config.layouts for row in manifest.rows]
    if config.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as pool:
            feats = list(pool.map(one, jobs))
    else:
        feats = [one(j) for j in jobs]
    feats.sort(key=lambda s: (s.layout_kind, s.clip_id))
    by_layout: dict[str, list[SceneFeatures]] = {}
    for s in feats:
        by_layout.setdefault(s.layout_kind, []).append(s)

    prov = config.provenance()
    _write_scene_tables(results_dir, config, feats, prov)
    _write_accuracy_tables(results_dir, config, manifest, by_layout, prov)
    return results_dir


def _write_scene_tables(results_dir: Path, config: ExperimentConfig, feats, prov: dict) -> None:
    snr_rows = []
    corr_rows = []
    weight_rows = []
    scene_rows = []
    layouts = build_layouts(config)
    for s in feats:
        scene_rows.append((s.layout_kind, s.clip_id, s.fold, s.label))
        if s.snr_inpainted_db is not None:
            deg = list(s.degraded_set)
            snr_rows.append(
                (
                    s.layout_kind,
                    s.clip_id,
                    float(np.median(s.snr_raw_db)),
                    float(np.median(s.snr_inpainted_db)),
                    float(np.mean(s.snr_raw_db)),
                    float(np.mean(s.snr_inpainted_db)),
                    float(np.median(s.snr_raw_db[deg])) if deg else float("nan"),
                    float(np.median(s.snr_inpainted_db[deg])) if deg else float("nan"),
                )
            )
        for variant, rep in sorted(s.correlations.items()):
            corr_rows.append(
                (variant, s.layout_kind, s.clip_id, rep["corr_snr"], rep["corr_distance"])
            )
        coords = layouts[s.layout_kind].coords
        for variant, w in sorted(s.weights.items()):
            for n in range(w.size):
                weight_rows.append(
                    (
                        variant,
                        s.layout_kind,
                        s.clip_id,
                        n,
                        float(coords[n, 0]),
                        float(coords[n, 1]),
                        float(w[n]),
                        float(s.snr_raw_db[n]),
                    )
                )
    _io.write_csv(
        results_dir / "scenes.csv",
        ["layout", "clip_id", "fold", "label"],
        scene_rows,
        header_comments=prov,
    )
    _io.write_csv(
        results_dir / "snr_gain.csv",
        ["layout", "clip_id", "median_raw_snr_db", "median_inpainted_snr_db",
         "mean_raw_snr_db", "mean_inpainted_snr_db",
         "median_raw_degraded_db", "median_inpainted_degraded_db"],
        snr_rows,
        header_comments=prov,
    )
    _io.write_csv(
        results_dir / "correlations.csv",
        ["variant", "layout", "clip_id", "corr_snr", "corr_distance"],
        corr_rows,
        header_comments=prov,
    )
    _io.write_csv(
        results_dir / "weights.csv",
        ["variant", "layout", "clip_id", "channel", "x", "y", "weight", "measured_snr_db"],
        weight_rows,
        header_comments=prov,
    )


def _write_accuracy_tables(results_dir: Path, config, manifest, by_layout, prov: dict) -> None:
    folds = manifest.folds
    acc_rows = []
    pred_rows = []
    cells: dict[tuple[str, str, str], list[float]] = {}
    for variant in config.variants:
        for train_kind in config.layouts:
            for test_kind in config.layouts:
                for fold in folds:
                    train = [
                        s for s in by_layout[train_kind] if s.fold != fold or len(folds) == 1
                    ]
                    test = [s for s in by_layout[test_kind] if s.fold == fold]
                    if not train or not test:
                        continue
                    model = reference_classifier_train(
                        [(s.pooled[variant], s.label) for s in train]
                    )
                    preds = [reference_classifier_predict(model, s.pooled[variant]) for s in test]
                    truth = [s.label for s in test]
                    rep = evaluate(preds, truth)
                    acc_rows.append(
                        (variant, train_kind, test_kind, fold, len(test), rep["accuracy_percent"])
                    )
                    cells.setdefault((variant, train_kind, test_kind), []).append(
                        rep["accuracy_percent"]
                    )
                    for s, p in zip(test, preds):
                        pred_rows.append((variant, train_kind, test_kind, fold, s.clip_id, s.label, p))
    _io.write_csv(
        results_dir / "accuracy.csv",
        ["variant", "train_layout", "test_layout", "fold", "n_test", "accuracy_percent"],
        acc_rows,
        header_comments=prov,
    )
    _io.write_csv(
        results_dir / "predictions.csv",
        ["variant", "train_layout", "test_layout", "fold", "clip_id", "truth", "prediction"],
        pred_rows,
        header_comments=prov,
    )
    summary = [
        (v, tr, te, float(np.mean(a))) for (v, tr, te), a in sorted(cells.items())
    ]
    _io.write_csv(
        results_dir / "accuracy_summary.csv",
        ["variant", "train_layout", "test_layout", "accuracy_percent"],
        summary,
        header_comments=prov,
    )


# -- plot data ---------------------------------------------------------------


def emit_plots(
    config: ExperimentConfig,
    results_dir: str | Path,
    plots_dir: str | Path,
    n_bins: int = 30,
    render_svg: bool = False,
) -> Path:
    """Derive plot-ready CSVs (and optional SVGs) from pipeline results."""
    results_dir = Path(results_dir)
    plots_dir = _ensure(Path(plots_dir))
    prov = config.provenance()

    _, weight_rows, _ = _io.read_csv(results_dir / "weights.csv")
    _, scene_rows, _ = _io.read_csv(results_dir / "scenes.csv")

    # distance histogram per layout over uniformly resampled sources
    layouts = build_layouts(config)
    rng = np.random.default_rng(config.seed)
    hist_rows = []
    mean_rows = []
    for kind in config.layouts:
        layout = layouts[kind]
        dists = []
        for _ in range(2000):
            pos = Position(
                float(rng.uniform(config.extent[0], config.extent[1])),
                float(rng.uniform(config.extent[2], config.extent[3])),
            )
            dists.append(source_distances(layout, pos))
        d = np.concatenate(dists)
        counts, edges = np.histogram(d, bins=n_bins)
        for b in range(n_bins):
            hist_rows.append((kind, float(edges[b]), float(edges[b + 1]), int(counts[b])))
        mean_rows.append((kind, float(d.mean())))
    _io.write_csv(
        plots_dir / "distance_histogram.csv",
        ["layout", "bin_lo_m", "bin_hi_m", "count"],
        hist_rows,
        header_comments=prov,
    )
    _io.write_csv(
        plots_dir / "distance_means.csv", ["layout", "mean_distance_m"], mean_rows,
        header_comments=prov,
    )

    scatter = [
        (r["variant"], r["layout"], r["clip_id"], r["measured_snr_db"], r["weight"])
        for r in weight_rows
    ]
    _io.write_csv(
        plots_dir / "weight_vs_snr.csv",
        ["variant", "layout", "clip_id", "measured_snr_db", "weight"],
        scatter,
        header_comments=prov,
    )

    heat_dir = _ensure(plots_dir / "weight_heatmaps")
    by_scene: dict[tuple[str, str, str], list[dict]] = {}
    for r in weight_rows:
        by_scene.setdefault((r["variant"], r["layout"], r["clip_id"]), []).append(r)
    for (variant, kind, clip_id), rows in sorted(by_scene.items()):
        _io.write_csv(
            heat_dir / f"{variant}_{kind}_{clip_id}.csv",
            ["channel", "x", "y", "weight"],
            [(r["channel"], r["x"], r["y"], r["weight"]) for r in rows],
            header_comments=prov,
        )

    if render_svg:
        _render_svgs(plots_dir, hist_rows, scatter, by_scene)
    return plots_dir


def _render_svgs(plots_dir: Path, hist_rows, scatter, by_scene) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots()
    kinds = sorted({r[0] for r in hist_rows})
    for kind in kinds:
        rows = [r for r in hist_rows if r[0] == kind]
        ax.step([r[1] for r in rows], [r[3] for r in rows], where="post", label=kind)
    ax.set_xlabel("channel-source distance [m]")
    ax.set_ylabel("count")
    ax.legend()
    fig.savefig(plots_dir / "distance_histogram.svg")
    plt.close(fig)

    fig, ax = plt.subplots()
    for variant in sorted({s[0] for s in scatter}):
        pts = [(float(s[3]), float(s[4])) for s in scatter if s[0] == variant]
        if pts:
            ax.scatter(*zip(*pts), s=4, label=variant, alpha=0.4)
    ax.set_xlabel("measured SNR [dB]")
    ax.set_ylabel("spatial weight")
    ax.legend()
    fig.savefig(plots_dir / "weight_vs_snr.svg")
    plt.close(fig)

    for (variant, kind, clip_id), rows in list(sorted(by_scene.items()))[:1]:
        fig, ax = plt.subplots()
        xs = [float(r["x"]) for r in rows]
        ys = [float(r["y"]) for r in rows]
        ws = [float(r["weight"]) for r in rows]
        sc = ax.scatter(xs, ys, c=ws, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="weight")
        ax.set_title(f"{variant} {kind} {clip_id}")
        fig.savefig(plots_dir / "weight_heatmap_example.svg")
        plt.close(fig)
