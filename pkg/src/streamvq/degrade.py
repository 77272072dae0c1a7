"""Deterministic amplitude-parameterized synthetic degradations.

Training kinds: gaussian_blur, jpeg_compression, brightness.
Held-out validation kinds: gaussian_noise, saturation, color_jitter.
Amplitude 0 is the identity for every kind; all randomness is derived from
(seed, clip_id, frame_idx) so any frame regenerates bit-identically.
"""

from __future__ import annotations

import hashlib
import io
import math
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from .dataio import Clip, Frame
from .errors import ParameterError

TRAIN_KINDS = ("gaussian_blur", "jpeg_compression", "brightness")
VAL_KINDS = ("gaussian_noise", "saturation", "color_jitter")
ALL_KINDS = TRAIN_KINDS + VAL_KINDS

BLUR_SIGMA_MAX = 5.0
NOISE_SIGMA_MAX = 0.30
BRIGHTNESS_OFFSET_MAX = 0.5
JITTER_GAIN_SPAN = 0.5

REC601_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class DegradationSpec:
    kind: str
    amplitude: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ParameterError(f"unknown degradation kind: {self.kind!r}")
        if not 0.0 <= self.amplitude <= 1.0:
            raise ParameterError(f"amplitude must be in [0, 1], got {self.amplitude}")


def _keyed_rng(seed: int, clip_id: str, tag) -> np.random.Generator:
    """Counter-based generator keyed by (seed, clip_id, tag); tag is a frame
    index or the string 'clip' for once-per-clip draws."""
    digest = hashlib.blake2b(
        f"{seed}:{clip_id}:{tag}".encode(), digest_size=8
    ).digest()
    return np.random.Generator(np.random.Philox(int.from_bytes(digest, "little")))


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return (k / k.sum()).astype(np.float32)


def _blur_frame(pixels: np.ndarray, sigma: float) -> np.ndarray:
    kernel = _gaussian_kernel(sigma)
    out = correlate1d(pixels, kernel, axis=0, mode="nearest")
    out = correlate1d(out, kernel, axis=1, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def _jpeg_frame(pixels: np.ndarray, amplitude: float) -> np.ndarray:
    quality = int(round(95 - 85 * amplitude))
    img = Image.fromarray(np.round(pixels * 255.0).astype(np.uint8))
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    decoded = np.asarray(Image.open(buf).convert("RGB"), dtype=np.float32)
    return decoded / 255.0


def _saturation_frame(pixels: np.ndarray, amplitude: float) -> np.ndarray:
    gray = pixels @ REC601_LUMA
    out = gray[..., None] + (1.0 - amplitude) * (pixels - gray[..., None])
    return np.clip(out.astype(np.float32), 0.0, 1.0)


def apply_degradation(clip: Clip, spec: DegradationSpec) -> Clip:
    """Apply one degradation to every frame; output pixels stay in [0, 1]."""
    if len(clip) == 0:
        raise ParameterError("cannot degrade an empty clip")
    if spec.amplitude == 0.0:
        return clip

    kind, a = spec.kind, spec.amplitude

    # once-per-clip draws for kinds whose randomness is clip-level
    if kind == "brightness":
        rng = _keyed_rng(spec.seed, clip.clip_id, "clip")
        offset = float(rng.integers(0, 2) * 2 - 1) * BRIGHTNESS_OFFSET_MAX * a
    elif kind == "color_jitter":
        rng = _keyed_rng(spec.seed, clip.clip_id, "clip")
        gains = rng.uniform(1.0 - JITTER_GAIN_SPAN * a, 1.0 + JITTER_GAIN_SPAN * a, size=3)
        gains = gains.astype(np.float32)

    frames = []
    for frame in clip.frames:
        p = frame.pixels
        if kind == "gaussian_blur":
            out = _blur_frame(p, BLUR_SIGMA_MAX * a)
        elif kind == "jpeg_compression":
            out = _jpeg_frame(p, a)
        elif kind == "brightness":
            out = np.clip(p + offset, 0.0, 1.0)
        elif kind == "gaussian_noise":
            frng = _keyed_rng(spec.seed, clip.clip_id, frame.frame_idx)
            noise = frng.standard_normal(p.shape, dtype=np.float32) * (NOISE_SIGMA_MAX * a)
            out = np.clip(p + noise, 0.0, 1.0)
        elif kind == "saturation":
            out = _saturation_frame(p, a)
        else:  # color_jitter
            out = np.clip(p * gains, 0.0, 1.0)
        frames.append(Frame(out.astype(np.float32), frame.clip_id, frame.frame_idx))
    return Clip(frames=tuple(frames), clip_id=clip.clip_id, fps_hint=clip.fps_hint)


def amplitude_sweep(
    clip: Clip, kind: str, grid: list[float], seed: int = 0
) -> list[tuple[float, Clip]]:
    """Degrade ``clip`` at each grid amplitude; grid must be ascending in [0, 1]."""
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("amplitude grid must be strictly ascending")
    return [(a, apply_degradation(clip, DegradationSpec(kind, a, seed))) for a in grid]


def save_clip_frames(clip: Clip, out_dir: str) -> None:
    """Persist a clip as zero-padded PNG frames mirroring the input layout."""
    os.makedirs(out_dir, exist_ok=True)
    for frame in clip.frames:
        img = Image.fromarray(np.round(frame.pixels * 255.0).astype(np.uint8))
        img.save(os.path.join(out_dir, f"{frame.frame_idx:05d}.png"))


def degraded_tree_path(out_root: str, kind: str, amplitude: float, clip_id: str) -> str:
    return os.path.join(out_root, kind, f"{amplitude:g}", clip_id)
