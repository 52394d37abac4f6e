"""Command-line interface.

Subcommands: layout, simulate, inpaint, features, weights, experiment,
report. Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as _io
from .analysis import spatial_weights
from .baselines import scaling_sparsemax
from .dsp import istft, log_mel, mel_filterbank, stft
from .errors import ConfigError, DataError
from .geometry import (
    ImagingGrid,
    Position,
    default_anchor,
    make_layout,
    save_geometry,
    write_positions_csv,
)
from .harness import (
    ClipManifest,
    ExperimentConfig,
    build_layouts,
    emit_plots,
    imaging_grid,
    load_config,
    make_embedding,
    run_pipeline,
    save_config,
    synthesize_dataset,
)
from .harness import _tokens_from_logmel  # shared token path for single-clip commands
from .propagation import build_operator
from .rtm import gram_filter, inpaint


def _add_config_flags(p: argparse.ArgumentParser, require_seed: bool = False) -> None:
    p.add_argument("--config", help="experiment config JSON; flags override its values")
    p.add_argument("--seed", type=int, required=require_seed)
    p.add_argument("--layouts", nargs="+", metavar="KIND")
    p.add_argument("--channels", type=int, dest="n_channels")
    p.add_argument("--spacing", type=float)
    p.add_argument("--extent", nargs=4, type=float, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--grid-spacing", type=float, dest="grid_spacing")
    p.add_argument("--speed-of-sound", type=float, dest="c", default=None)
    p.add_argument("--snr-range", nargs=2, type=float, metavar=("LOW", "HIGH"))
    p.add_argument("--tau", type=float)
    p.add_argument("--clip-seconds", type=float, dest="clip_seconds")
    p.add_argument("--variants", nargs="+")
    p.add_argument("--inpaint-norm", dest="inpaint_norm", choices=["none", "global", "diagonal"])
    p.add_argument("--inpaint-mode", dest="inpaint_mode", choices=["image_path", "gram_path"])
    p.add_argument("--dns-amplitude-comp", dest="amplitude_comp", choices=["on", "off"])
    p.add_argument("--sparsemax-scale", type=float, dest="sparsemax_scale")
    p.add_argument("--workers", type=int)
    p.add_argument("--manifest", dest="manifest_path")
    p.add_argument("--n-mels", type=int, dest="n_mels")
    p.add_argument("--token-dim", type=int, dest="token_dim")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    for key in (
        "seed", "layouts", "n_channels", "spacing", "grid_spacing", "c", "tau",
        "clip_seconds", "variants", "inpaint_norm", "inpaint_mode", "sparsemax_scale",
        "workers", "manifest_path", "n_mels", "token_dim",
    ):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "extent", None) is not None:
        overrides["extent"] = tuple(args.extent)
    if getattr(args, "snr_range", None) is not None:
        overrides["snr_low"], overrides["snr_high"] = args.snr_range
    if getattr(args, "amplitude_comp", None) is not None:
        overrides["amplitude_comp"] = args.amplitude_comp == "on"
    if args.config:
        return load_config(args.config, **overrides)
    if "seed" not in overrides:
        raise ConfigError("either --config or --seed is required")
    return ExperimentConfig.from_dict(overrides)


def _cmd_layout(args) -> int:
    extent = tuple(args.extent) if args.extent else (0.0, 50.0, 0.0, 50.0)
    anchor = Position(*args.anchor) if args.anchor else default_anchor(args.kind, extent)
    layout = make_layout(args.kind, args.channels or 50, args.spacing or 1.0, anchor)
    if args.out_csv:
        write_positions_csv(args.out_csv, layout.positions)
        print(f"wrote {args.out_csv}")
    if args.out_config:
        grid = ImagingGrid(extent=extent, spacing=args.grid_spacing or 1.0)
        save_geometry(args.out_config, layout=layout, grid=grid)
        print(f"wrote {args.out_config}")
    if not args.out_csv and not args.out_config:
        for i, p in enumerate(layout.positions):
            print(f"{i},{p.x:.6f},{p.y:.6f},{p.z:.6f}")
    return 0


def _cmd_simulate(args) -> int:
    config = _config_from_args(args)
    if not config.manifest_path:
        raise ConfigError("simulate needs a clip manifest (--manifest or config)")
    manifest = ClipManifest.load(config.manifest_path)
    out = Path(args.out)
    synthesize_dataset(config, manifest, out)
    print(f"dataset written to {out}")
    return 0


def _single_clip_setup(args):
    config = _config_from_args(args)
    kind = args.layout_kind or config.layouts[0]
    layout = build_layouts(config)[kind] if kind in config.layouts else make_layout(
        kind, config.n_channels, config.spacing, default_anchor(kind, config.extent)
    )
    return config, layout


def _cmd_inpaint(args) -> int:
    config, layout = _single_clip_setup(args)
    samples, rate = _io.read_wav(args.infile)
    if rate != config.sample_rate:
        raise DataError(f"{args.infile} is {rate} Hz; config expects {config.sample_rate}")
    if samples.shape[0] != layout.n_channels:
        raise DataError(
            f"{args.infile} has {samples.shape[0]} channels; layout has {layout.n_channels}"
        )
    params = config.stft_params()
    op = build_operator(layout, imaging_grid(config), params, c=config.c)
    spec = stft(samples, params)
    out_spec = inpaint(spec, op, mode=config.inpaint_mode, norm=config.inpaint_norm)
    if args.out_tensor:
        _io.write_tensor(args.out_tensor, out_spec.data, axes=["channel", "freq", "frame"],
                         meta=config.provenance())
        print(f"wrote {args.out_tensor}")
    if args.outfile:
        _io.write_wav(args.outfile, istft(out_spec, params), config.sample_rate)
        print(f"wrote {args.outfile}")
    return 0


def _cmd_features(args) -> int:
    config, layout = _single_clip_setup(args)
    samples, rate = _io.read_wav(args.infile)
    if rate != config.sample_rate:
        raise DataError(f"{args.infile} is {rate} Hz; config expects {config.sample_rate}")
    params = config.stft_params()
    bank = mel_filterbank(params, n_mels=config.n_mels)
    feats = log_mel(stft(samples, params), bank)
    if args.tokens:
        w_emb, b_emb = make_embedding(
            config.patch_mel * config.patch_frames, config.token_dim, seed=config.seed
        )
        tokens = _tokens_from_logmel(feats, config, w_emb, b_emb)
        _io.write_tensor(args.out, tokens.tokens, axes=["channel", "patch", "dim"],
                         meta=config.provenance())
    else:
        _io.write_tensor(args.out, feats.data, axes=["channel", "mel", "frame"],
                         meta=config.provenance())
    print(f"wrote {args.out}")
    return 0


def _cmd_weights(args) -> int:
    config, layout = _single_clip_setup(args)
    if not args.scores and not args.infile:
        raise ConfigError("weights needs either --in (audio) or --scores (CSV)")
    if args.scores:
        _, rows, _ = _io.read_csv(args.scores)
        scores = np.array([float(r["score"]) for r in rows])
        w = scaling_sparsemax(scores, scale=config.sparsemax_scale).w
    else:
        samples, rate = _io.read_wav(args.infile)
        if rate != config.sample_rate:
            raise DataError(f"{args.infile} is {rate} Hz; config expects {config.sample_rate}")
        params = config.stft_params()
        bank = mel_filterbank(params, n_mels=config.n_mels)
        w_emb, b_emb = make_embedding(
            config.patch_mel * config.patch_frames, config.token_dim, seed=config.seed
        )
        tokens = _tokens_from_logmel(log_mel(stft(samples, params), bank), config, w_emb, b_emb)
        w = spatial_weights(tokens).w
    if w.size != layout.n_channels:
        raise DataError(f"got {w.size} weights for a {layout.n_channels}-channel layout")
    coords = layout.coords
    rows = [(n, float(coords[n, 0]), float(coords[n, 1]), float(w[n])) for n in range(w.size)]
    _io.write_csv(args.out, ["channel", "x", "y", "weight"], rows,
                  header_comments=config.provenance())
    print(f"wrote {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    config = _config_from_args(args)
    if not config.manifest_path:
        raise ConfigError("experiment needs a clip manifest (--manifest or config)")
    out = Path(args.out or config.output_dir or "experiment_out")
    manifest = ClipManifest.load(config.manifest_path)
    dataset_dir = out / "dataset"
    results_dir = out / "results"
    synthesize_dataset(config, manifest, dataset_dir)
    run_pipeline(config, dataset_dir, results_dir)
    save_config(out / "config.json", config)
    print(f"results written to {results_dir}")
    return 0


def _cmd_report(args) -> int:
    config = _config_from_args(args)
    results = Path(args.results)
    if not (results / "accuracy_summary.csv").exists():
        raise DataError(f"{results} does not look like a results directory")
    plots = emit_plots(config, results, args.out or results / "plots",
                       n_bins=args.bins, render_svg=args.render_svg)
    _, rows, _ = _io.read_csv(results / "accuracy_summary.csv")
    for r in rows:
        print(
            f"{r['variant']:16s} train={r['train_layout']:12s} test={r['test_layout']:12s} "
            f"acc={float(r['accuracy_percent']):5.1f}%"
        )
    print(f"plot data written to {plots}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtmpaint", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("layout", help="generate sensor layouts")
    p.add_argument("--kind", required=True, choices=["circular", "linear", "right_angle"])
    p.add_argument("--channels", type=int)
    p.add_argument("--spacing", type=float)
    p.add_argument("--extent", nargs=4, type=float, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--grid-spacing", type=float)
    p.add_argument("--anchor", nargs=2, type=float, metavar=("X", "Y"))
    p.add_argument("--out-csv")
    p.add_argument("--out-config")
    p.set_defaults(func=_cmd_layout)

    p = sub.add_parser("simulate", help="synthesize a degraded-scene dataset")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("inpaint", help="inpaint one multichannel clip")
    _add_config_flags(p)
    p.add_argument("--layout-kind")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile")
    p.add_argument("--out-tensor")
    p.set_defaults(func=_cmd_inpaint)

    p = sub.add_parser("features", help="log-mel or token features for one clip")
    _add_config_flags(p)
    p.add_argument("--layout-kind")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tokens", action="store_true", help="emit embedding tokens instead of log-mel")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("weights", help="channel-contribution weights for one clip")
    _add_config_flags(p)
    p.add_argument("--layout-kind")
    p.add_argument("--in", dest="infile")
    p.add_argument("--scores", help="CSV with a 'score' column; applies scaling sparsemax")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_weights)

    p = sub.add_parser("experiment", help="full sweep: synthesize, featurize, evaluate")
    _add_config_flags(p, require_seed=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="summaries and plot data from results")
    _add_config_flags(p)
    p.add_argument("--results", required=True)
    p.add_argument("--out")
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--render-svg", action="store_true")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
