"""Training loop: MAE over the three metric channels, split by augmentation kind."""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass, field

import numpy as np
import torch

from .dataio import DatasetManifest, load_clip
from .degrade import TRAIN_KINDS, VAL_KINDS, DegradationSpec, apply_degradation
from .errors import NumericError, ParameterError
from .labelgen import LabelRow, LabelTable
from .model import ModelConfig, QualityPredictor, save_checkpoint

HISTORY_HEADER = "epoch,step,split,loss_total,mae_lpips,mae_psnr,mae_ssim"


@dataclass
class TrainConfig:
    train_kinds: tuple[str, ...] = TRAIN_KINDS
    val_kinds: tuple[str, ...] = VAL_KINDS
    clip_len: int = 8
    resolution: tuple[int, int] = (96, 96)
    batch_size: int = 2
    learning_rate: float = 1e-4
    epochs: int = 10
    max_steps: int | None = None  # overrides epochs when set
    seed: int = 0

    def __post_init__(self):
        if set(self.train_kinds) & set(self.val_kinds):
            raise ParameterError("train and validation kind families must be disjoint")


def mae_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean of the three per-metric MAEs over all (b, t) entries."""
    if pred.shape != target.shape:
        raise ParameterError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    return (pred - target).abs().mean(dim=tuple(range(pred.dim() - 1))).mean()


def per_metric_mae(pred: torch.Tensor, target: torch.Tensor) -> tuple[float, float, float]:
    mae = (pred - target).abs().mean(dim=tuple(range(pred.dim() - 1)))
    return tuple(float(v) for v in mae)


def make_split(table: LabelTable, config: TrainConfig) -> tuple[LabelTable, LabelTable]:
    """Partition rows purely by degradation kind (no clip-level holdout)."""
    train = table.filter(lambda r: r.kind in config.train_kinds)
    val = table.filter(lambda r: r.kind in config.val_kinds)
    if len(train) == 0:
        raise ParameterError("no rows for any training kind")
    if len(val) == 0:
        raise ParameterError("no rows for any validation kind")
    return train, val


@dataclass
class HistoryRecord:
    epoch: int
    step: int
    split: str
    loss_total: float
    mae_lpips: float
    mae_psnr: float
    mae_ssim: float

    def csv_row(self) -> str:
        return (
            f"{self.epoch},{self.step},{self.split},{self.loss_total:.9g},"
            f"{self.mae_lpips:.9g},{self.mae_psnr:.9g},{self.mae_ssim:.9g}"
        )


def write_history(records: list[HistoryRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(HISTORY_HEADER + "\n")
        for rec in records:
            f.write(rec.csv_row() + "\n")


class _ClipCache:
    def __init__(self, manifest: DatasetManifest, resolution: tuple[int, int]):
        self.manifest = manifest
        self.resolution = resolution
        self._cache = {}

    def get(self, clip_id: str):
        if clip_id not in self._cache:
            self._cache[clip_id] = load_clip(
                self.manifest, clip_id, resize_to=self.resolution
            )
        return self._cache[clip_id]


def _index_labels(table: LabelTable):
    """(clip_id, kind) -> {amplitude: {frame_idx: (row)}}, plus the seed."""
    index: dict[tuple[str, str], dict[float, dict[int, LabelRow]]] = {}
    for r in table.rows():
        index.setdefault((r.clip_id, r.kind), {}).setdefault(r.amplitude, {})[
            r.frame_idx
        ] = r
    return index


def _batch_from_rows(cache, clip_id, kind, amplitude, seed, start, clip_len, frame_rows):
    """Degraded frame window plus its label targets as tensors."""
    clip = cache.get(clip_id)
    spec = DegradationSpec(kind, amplitude, seed)
    degraded = apply_degradation(clip, spec)
    idxs = list(range(start, start + clip_len))
    frames = np.stack([degraded.frames[i].pixels for i in idxs])  # (t, H, W, 3)
    targets = np.array(
        [
            [frame_rows[i].lpips_q, frame_rows[i].psnr_q, frame_rows[i].ssim_q]
            for i in idxs
        ],
        dtype=np.float32,
    )
    x = torch.from_numpy(frames.transpose(0, 3, 1, 2).copy())  # (t, 3, H, W)
    return x, torch.from_numpy(targets)


def _evaluate_split(model, cache, index, clip_len, max_windows=None):
    """Per-metric MAE of the model over every (clip, kind, amplitude) window."""
    model.eval()
    preds, targets = [], []
    with torch.no_grad():
        for (clip_id, kind), by_amp in sorted(index.items()):
            for amplitude, frame_rows in sorted(by_amp.items()):
                seed = next(iter(frame_rows.values())).seed
                t_total = len(frame_rows)
                window = min(clip_len, t_total)
                x, y = _batch_from_rows(
                    cache, clip_id, kind, amplitude, seed, 0, window, frame_rows
                )
                out, _ = model(x.unsqueeze(0))
                preds.append(out.squeeze(0))
                targets.append(y)
                if max_windows is not None and len(preds) >= max_windows:
                    break
    model.train()
    pred = torch.cat(preds, dim=0)
    target = torch.cat(targets, dim=0)
    maes = per_metric_mae(pred, target)
    return float(sum(maes) / 3.0), maes


def train_loop(
    manifest: DatasetManifest,
    table: LabelTable,
    model_config: ModelConfig,
    config: TrainConfig,
    out_dir: str,
    resume_from: str | None = None,
) -> tuple[str, list[HistoryRecord]]:
    """Train, tracking per-epoch train loss and validation MAE on unseen kinds.

    Returns the best-validation checkpoint path and the history records.
    Deterministic for a fixed seed on a single-threaded numeric path.
    ``resume_from`` points at a ``resume.pt`` snapshot written per epoch;
    resuming reproduces the uninterrupted run step for step.
    """
    os.makedirs(out_dir, exist_ok=True)
    torch.manual_seed(config.seed)
    sampler = random.Random(config.seed)

    train_table, val_table = make_split(table, config)
    train_index = _index_labels(train_table)
    val_index = _index_labels(val_table)
    cache = _ClipCache(manifest, config.resolution)

    model = QualityPredictor(model_config)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    train_units = sorted(train_index.keys())
    best_path = os.path.join(out_dir, "best.nvq")
    last_path = os.path.join(out_dir, "last.nvq")
    resume_path = os.path.join(out_dir, "resume.pt")
    history: list[HistoryRecord] = []
    best_val = math.inf
    step = 0
    epoch = 0

    if resume_from is not None:
        snapshot = torch.load(resume_from, weights_only=False)
        model.load_state_dict(snapshot["model"])
        optimizer.load_state_dict(snapshot["optimizer"])
        sampler.setstate(snapshot["sampler"])
        torch.set_rng_state(snapshot["torch_rng"])
        history = snapshot["history"]
        best_val = snapshot["best_val"]
        step = snapshot["step"]
        epoch = snapshot["epoch"]

    def save_resume():
        torch.save(
            {
                "model": model.state_dict(),
                "optimizer": optimizer.state_dict(),
                "sampler": sampler.getstate(),
                "torch_rng": torch.get_rng_state(),
                "history": history,
                "best_val": best_val,
                "step": step,
                "epoch": epoch,
            },
            resume_path,
        )

    def sample_batch():
        items = []
        for _ in range(config.batch_size):
            clip_id, kind = train_units[sampler.randrange(len(train_units))]
            assert kind in config.train_kinds  # validation kinds never reach a gradient step
            by_amp = train_index[(clip_id, kind)]
            amplitude = sorted(by_amp)[sampler.randrange(len(by_amp))]
            frame_rows = by_amp[amplitude]
            seed = next(iter(frame_rows.values())).seed
            t_total = len(frame_rows)
            window = min(config.clip_len, t_total)
            start = sampler.randrange(t_total - window + 1)
            items.append(
                _batch_from_rows(
                    cache, clip_id, kind, amplitude, seed, start, window, frame_rows
                )
                + ((clip_id, kind, amplitude),)
            )
        xs = torch.stack([it[0] for it in items])
        ys = torch.stack([it[1] for it in items])
        keys = [it[2] for it in items]
        return xs, ys, keys

    done = False
    while not done:
        epoch += 1
        steps_this_epoch = max(1, len(train_units) // config.batch_size)
        epoch_losses = []
        for _ in range(steps_this_epoch):
            xs, ys, keys = sample_batch()
            optimizer.zero_grad()
            pred, _ = model(xs)
            loss = mae_loss(pred, ys)
            if not torch.isfinite(loss):
                raise NumericError(f"non-finite loss at step {step} on batch {keys}")
            loss.backward()
            optimizer.step()
            step += 1
            epoch_losses.append(float(loss.detach()))
            if config.max_steps is not None and step >= config.max_steps:
                done = True
                break
        if config.max_steps is None and epoch >= config.epochs:
            done = True

        train_total, train_maes = _evaluate_split(
            model, cache, train_index, config.clip_len
        )
        history.append(
            HistoryRecord(epoch, step, "train", train_total, *train_maes)
        )
        val_total, val_maes = _evaluate_split(model, cache, val_index, config.clip_len)
        history.append(HistoryRecord(epoch, step, "val", val_total, *val_maes))
        if val_total < best_val:
            best_val = val_total
            save_checkpoint(model, best_path)
        save_resume()

    save_checkpoint(model, last_path)
    if not os.path.exists(best_path):
        save_checkpoint(model, best_path)
    write_history(history, os.path.join(out_dir, "history.csv"))
    return best_path, history
