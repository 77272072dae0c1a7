"""Command-line entry point wiring the pipeline end to end.

Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import random
import sys

import numpy as np
import torch

from . import dataio, degrade, evaluate, labelgen, train as train_mod
from .errors import (
    DataError,
    NumericError,
    ParameterError,
    StreamVQError,
)
from .model import ModelConfig, load_checkpoint

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = random.SystemRandom().randrange(2**31)
        _log(f"seed: {seed} (randomly chosen)")
    else:
        _log(f"seed: {seed}")
    return seed


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ParameterError(f"bad amplitude grid {text!r}: {exc}") from exc
    if not grid:
        raise ParameterError("amplitude grid is empty")
    return grid


TRAIN_CONFIG_KEYS = {
    "clip_len": int,
    "resolution": lambda s: tuple(int(v) for v in s.split("x")),
    "batch_size": int,
    "learning_rate": float,
    "epochs": int,
    "max_steps": int,
    "seed": int,
    "temporal_enabled": lambda s: s.lower() in ("1", "true", "yes"),
    "init_seed": int,
}


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected key=value")
                key, raw = (part.strip() for part in line.split("=", 1))
                if key not in TRAIN_CONFIG_KEYS:
                    raise DataError(f"{path}:{lineno}: unknown config key {key!r}")
                values[key] = TRAIN_CONFIG_KEYS[key](raw)
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    return values


def cmd_scan(args) -> int:
    manifest = dataio.scan_dataset(args.root, layout=args.layout)
    for warning in manifest.warnings:
        _log(f"warning: {warning}")
    dataio.save_manifest(manifest, args.out)
    _log(f"wrote manifest with {len(manifest.entries)} clips to {args.out}")
    return EXIT_OK


def cmd_degrade(args) -> int:
    seed = _resolve_seed(args.seed)
    manifest = dataio.load_manifest(args.manifest)
    spec = degrade.DegradationSpec(args.kind, args.amplitude, seed)
    for entry in manifest.entries:
        clip = dataio.load_clip(manifest, entry.clip_id)
        degraded = degrade.apply_degradation(clip, spec)
        out_dir = degrade.degraded_tree_path(args.out, args.kind, args.amplitude, entry.clip_id)
        degrade.save_clip_frames(degraded, out_dir)
        _log(f"degraded {entry.clip_id} -> {out_dir}")
    return EXIT_OK


def cmd_labels(args) -> int:
    seed = _resolve_seed(args.seed)
    manifest = dataio.load_manifest(args.manifest)
    kinds = [k.strip() for k in args.kinds.split(",")] if args.kinds else list(degrade.ALL_KINDS)
    grid = _parse_grid(args.grid)
    resize = tuple(int(v) for v in args.resize.split("x")) if args.resize else None
    table = labelgen.generate_labels(manifest, kinds, grid, seed, resize_to=resize)
    if args.merge_lpips:
        sidecar = labelgen.import_csv(args.merge_lpips)
        table, unmatched = labelgen.merge_external_lpips(table, sidecar)
        _log(f"merged external lpips: {len(sidecar)} sidecar rows, {len(unmatched)} unmatched")
        for key in unmatched:
            _log(f"unmatched sidecar key: {key}")
    labelgen.export_csv(table, args.out)
    _log(f"wrote {len(table)} label rows to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    file_values = _read_config_file(args.config) if args.config else {}
    resolved = dict(file_values)
    # flags override file values; defaults fill in the rest
    if args.seed is not None:
        resolved["seed"] = args.seed
    if args.epochs is not None:
        resolved["epochs"] = args.epochs
    if args.max_steps is not None:
        resolved["max_steps"] = args.max_steps
    if args.baseline:
        resolved["temporal_enabled"] = False
    resolved.setdefault("seed", _resolve_seed(None))

    temporal = resolved.pop("temporal_enabled", True)
    init_seed = resolved.pop("init_seed", resolved["seed"])
    train_cfg = train_mod.TrainConfig(**resolved)
    model_cfg = ModelConfig(temporal_enabled=temporal, init_seed=init_seed)
    _log(f"resolved train config: {train_cfg}")
    _log(f"resolved model config: {model_cfg}")

    torch.manual_seed(train_cfg.seed)
    np.random.seed(train_cfg.seed % 2**32)

    manifest = dataio.load_manifest(args.manifest)
    table = labelgen.import_csv(args.labels)
    best_path, history = train_mod.train_loop(manifest, table, model_cfg, train_cfg, args.out)
    _log(f"best checkpoint: {best_path}")
    _log(f"history: {os.path.join(args.out, 'history.csv')}")
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = dataio.load_manifest(args.manifest)
    table = labelgen.import_csv(args.labels)
    results: dict[str, list[evaluate.PredictionSeries]] = {}
    for ckpt_path in args.checkpoints:
        model = load_checkpoint(ckpt_path)
        model_id = os.path.splitext(os.path.basename(ckpt_path))[0]
        if model_id in results:
            model_id = f"{model_id}_{len(results)}"
        series_list = []
        for entry in manifest.entries:
            rows = [r for r in table.rows() if r.clip_id == entry.clip_id]
            by_key: dict = {}
            for r in rows:
                by_key.setdefault((r.kind, r.amplitude, r.seed), {})[r.frame_idx] = r
            for (kind, amplitude, seed), frame_rows in sorted(by_key.items()):
                clip = dataio.load_clip(manifest, entry.clip_id, resize_to=args.resize_parsed)
                degraded = degrade.apply_degradation(
                    clip, degrade.DegradationSpec(kind, amplitude, seed)
                )
                tensor = torch.from_numpy(
                    degraded.to_array().transpose(0, 3, 1, 2).copy()
                )
                preds = evaluate.streaming_infer(
                    model, tensor, args.chunk_len, args.overlap, args.mode
                )
                gt = np.array(
                    [
                        [frame_rows[t].lpips_q, frame_rows[t].psnr_q, frame_rows[t].ssim_q]
                        for t in range(len(frame_rows))
                    ]
                )
                series_list.append(
                    evaluate.PredictionSeries(
                        clip_id=f"{entry.clip_id}__{kind}__{amplitude:g}",
                        predictions=preds,
                        ground_truth=gt,
                        model_id=model_id,
                    )
                )
        results[model_id] = series_list
    evaluate.emit_report(results, args.out, label_table=table)
    _log(f"report written to {args.out}")
    return EXIT_OK


def cmd_curves(args) -> int:
    table = labelgen.import_csv(args.labels)
    evaluate.write_curves(table, args.out)
    _log(f"curves written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamvq",
        description="No-reference streaming video quality toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="index a frame-directory dataset into a manifest")
    p.add_argument("root")
    p.add_argument("--layout", choices=["davis_style", "flat"], default="davis_style")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("degrade", help="write a degraded frame tree")
    p.add_argument("manifest")
    p.add_argument("--kind", required=True, choices=degrade.ALL_KINDS)
    p.add_argument("--amplitude", type=float, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("labels", help="generate the ground-truth label CSV")
    p.add_argument("manifest")
    p.add_argument("--kinds", default=None, help="comma-separated; default all six")
    p.add_argument("--grid", default="0,0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--resize", default=None, help="HxW, e.g. 96x96")
    p.add_argument("--merge-lpips", default=None, help="sidecar CSV of external lpips rows")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("train", help="train the quality predictor")
    p.add_argument("manifest")
    p.add_argument("labels")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--baseline", action="store_true", help="disable the temporal stage")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="streaming evaluation and report emission")
    p.add_argument("checkpoints", nargs="+")
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--chunk-len", type=int, default=8)
    p.add_argument("--overlap", type=int, default=0)
    p.add_argument("--mode", choices=["carry_state", "warm_overlap"], default="carry_state")
    p.add_argument("--resize", default=None, help="HxW used when labels were generated resized")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curves", help="amplitude-impact curve CSVs from a label table")
    p.add_argument("labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curves)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if getattr(args, "resize", None) is not None and args.command == "eval":
        args.resize_parsed = tuple(int(v) for v in args.resize.split("x"))
    elif args.command == "eval":
        args.resize_parsed = None
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, StreamVQError, OSError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
