"""Chunked streaming inference and the reporting stack (MAE, Pearson r,
3-frame smoothing, mean-centering, CSV report emission)."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import torch

from .dataio import chunk_ranges
from .errors import ParameterError, UndefinedCorrelationError
from .labelgen import LabelTable, impact_curve
from .model import QualityPredictor

METRIC_NAMES = ("lpips", "psnr", "ssim")


@dataclass
class PredictionSeries:
    clip_id: str
    predictions: np.ndarray  # (T, 3)
    ground_truth: np.ndarray  # (T, 3)
    model_id: str

    def __post_init__(self):
        if self.predictions.shape != self.ground_truth.shape:
            raise ParameterError("prediction/ground-truth length mismatch")


def streaming_infer(
    model: QualityPredictor,
    clip_tensor: torch.Tensor,
    chunk_len: int,
    overlap: int = 0,
    mode: str = "carry_state",
) -> np.ndarray:
    """Predict per-frame quality for one clip tensor (T, 3, H, W).

    ``carry_state``: disjoint chunks, LSTM state carried across them, every
    frame predicted once; matches a full-sequence pass.
    ``warm_overlap``: each chunk starts from zero state; the first ``overlap``
    frames of non-initial chunks only warm the state, and overlapped frames
    take their prediction from the later chunk.
    """
    if mode not in ("carry_state", "warm_overlap"):
        raise ParameterError(f"unknown streaming mode: {mode!r}")
    if mode == "carry_state" and overlap != 0:
        raise ParameterError("carry_state mode requires overlap=0")
    if mode == "warm_overlap" and overlap < 1:
        raise ParameterError("warm_overlap mode requires overlap >= 1")

    total = clip_tensor.shape[0]
    ranges = chunk_ranges(total, chunk_len, overlap)
    outputs = np.zeros((total, 3), dtype=np.float64)
    model.eval()
    with torch.no_grad():
        if mode == "carry_state":
            state = None
            for start, stop in ranges:
                pred, state = model(clip_tensor[start:stop].unsqueeze(0), state)
                outputs[start:stop] = pred.squeeze(0).numpy()
        else:
            # each chunk starts cold; overlapped frames end up with the later
            # chunk's prediction because later writes overwrite earlier tails
            for start, stop in ranges:
                pred, _ = model(clip_tensor[start:stop].unsqueeze(0))
                outputs[start:stop] = pred.squeeze(0).numpy()
    return outputs


def mae_report(series_list: list[PredictionSeries]) -> dict[str, float]:
    """Pooled per-metric MAE over all frames of all series."""
    if not series_list:
        raise ParameterError("no series to report on")
    pred = np.concatenate([s.predictions for s in series_list], axis=0)
    gt = np.concatenate([s.ground_truth for s in series_list], axis=0)
    err = np.abs(pred - gt).mean(axis=0)
    return {name: float(err[i]) for i, name in enumerate(METRIC_NAMES)}


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("pearson_r expects two equal-length 1-D series")
    if len(x) < 2:
        raise ParameterError("pearson_r needs at least 2 samples")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    return float((xc @ yc) / (sx * sy))


def moving_average(series, window: int = 3) -> np.ndarray:
    """Centered moving mean with truncated windows at the edges."""
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"window must be odd and >= 1, got {window}")
    x = np.asarray(series, dtype=np.float64)
    half = window // 2
    out = np.empty_like(x)
    for i in range(len(x)):
        lo = max(0, i - half)
        hi = min(len(x), i + half + 1)
        out[i] = x[lo:hi].mean()
    return out


def mean_center(series) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if len(x) == 0:
        raise ParameterError("cannot mean-center an empty series")
    return x - x.mean()


def composite_score(triplet_series) -> np.ndarray:
    """Per-frame mean of the three quality components; input shape (T, 3)."""
    x = np.asarray(triplet_series, dtype=np.float64)
    return x.mean(axis=-1)


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def emit_report(
    results: dict[str, list[PredictionSeries]],
    out_dir: str,
    label_table: LabelTable | None = None,
) -> None:
    """Write report.csv (pooled MAE and r per model x metric), per-clip r
    diagnostics, per-series CSVs, and impact-curve CSVs when labels given."""
    os.makedirs(out_dir, exist_ok=True)

    lines = ["model_id,metric,mae,pearson_r"]
    diag_lines = ["model_id,clip_id,metric,pearson_r"]
    for model_id in sorted(results):
        series_list = results[model_id]
        maes = mae_report(series_list)
        pred = np.concatenate([s.predictions for s in series_list], axis=0)
        gt = np.concatenate([s.ground_truth for s in series_list], axis=0)
        for i, name in enumerate(METRIC_NAMES):
            try:
                r = _fmt(pearson_r(pred[:, i], gt[:, i]))
            except UndefinedCorrelationError:
                r = "undefined"
            lines.append(f"{model_id},{name},{_fmt(maes[name])},{r}")
            for s in series_list:
                try:
                    rc = _fmt(pearson_r(s.predictions[:, i], s.ground_truth[:, i]))
                except UndefinedCorrelationError:
                    rc = "undefined"
                diag_lines.append(f"{model_id},{s.clip_id},{name},{rc}")
    _write_lines(os.path.join(out_dir, "report.csv"), lines)
    _write_lines(os.path.join(out_dir, "report_per_clip.csv"), diag_lines)

    series_dir = os.path.join(out_dir, "series")
    os.makedirs(series_dir, exist_ok=True)
    for model_id in sorted(results):
        for s in results[model_id]:
            rows = ["frame_idx,gt_lpips,gt_psnr,gt_ssim,pred_lpips,pred_psnr,pred_ssim"]
            for t in range(len(s.predictions)):
                gt_vals = ",".join(_fmt(v) for v in s.ground_truth[t])
                pr_vals = ",".join(_fmt(v) for v in s.predictions[t])
                rows.append(f"{t},{gt_vals},{pr_vals}")
            _write_lines(os.path.join(series_dir, f"{model_id}__{s.clip_id}.csv"), rows)

    if label_table is not None:
        write_curves(label_table, os.path.join(out_dir, "curves"))


def write_curves(label_table: LabelTable, out_dir: str) -> None:
    """Amplitude-sweep impact curves, one CSV per degradation kind."""
    os.makedirs(out_dir, exist_ok=True)
    for kind in sorted(label_table.kinds()):
        rows = ["amplitude,mean_lpips_q,mean_psnr_q,mean_ssim_q"]
        for amp, lp, ps, ss in impact_curve(label_table, kind):
            rows.append(f"{_fmt(amp)},{_fmt(lp)},{_fmt(ps)},{_fmt(ss)}")
        _write_lines(os.path.join(out_dir, f"{kind}.csv"), rows)


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
