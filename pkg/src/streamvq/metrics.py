"""Full-reference metric kernels and their normalization to [0, 1] quality scores.

PSNR uses peak 1.0 (the pixel domain) and is mapped through a [10, 50] dB
clamp; SSIM follows the classical 11x11 Gaussian-window formulation; the
perceptual distance mirrors the LPIPS recipe (channel-unit-normalized deep
features, squared L2 difference, spatial average, sum over layers) on a
small seeded random-weight convolutional stack. Higher quality score = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .dataio import Frame
from .errors import ParameterError

PSNR_CLAMP_DB = (10.0, 50.0)
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pixels(frame) -> np.ndarray:
    return frame.pixels if isinstance(frame, Frame) else np.asarray(frame)


def _check_same_shape(ref: np.ndarray, deg: np.ndarray) -> None:
    if ref.shape != deg.shape:
        raise ParameterError(f"frame shape mismatch: {ref.shape} vs {deg.shape}")


def mse(ref, deg) -> float:
    a, b = _pixels(ref).astype(np.float64), _pixels(deg).astype(np.float64)
    _check_same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def psnr_db(ref, deg) -> float:
    """PSNR in dB with peak 1.0; identical frames give +inf."""
    err = mse(ref, deg)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / err)


def normalize_psnr(db: float) -> float:
    lo, hi = PSNR_CLAMP_DB
    if math.isinf(db):
        return 1.0
    return (min(max(db, lo), hi) - lo) / (hi - lo)


def _ssim_window() -> np.ndarray:
    half = (SSIM_WINDOW - 1) / 2
    x = np.arange(SSIM_WINDOW, dtype=np.float64) - half
    g = np.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    g /= g.sum()
    return np.outer(g, g)


_WINDOW = _ssim_window()


def _windowed_mean(img: np.ndarray) -> np.ndarray:
    half = SSIM_WINDOW // 2
    out = correlate(img, _WINDOW, mode="constant")
    return out[half:-half, half:-half]


def ssim(ref, deg) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows, averaged across channels."""
    a, b = _pixels(ref).astype(np.float64), _pixels(deg).astype(np.float64)
    _check_same_shape(a, b)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ParameterError(
            f"frame {a.shape[:2]} smaller than SSIM window {SSIM_WINDOW}"
        )
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    values = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mu_x = _windowed_mean(x)
        mu_y = _windowed_mean(y)
        sigma_x = _windowed_mean(x * x) - mu_x * mu_x
        sigma_y = _windowed_mean(y * y) - mu_y * mu_y
        sigma_xy = _windowed_mean(x * y) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * sigma_xy + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (sigma_x + sigma_y + c2)
        values.append(np.mean(num / den))
    return float(np.mean(values))


def ssim_quality(s: float) -> float:
    return max(s, 0.0)


@dataclass(frozen=True)
class ConvLayerSpec:
    in_channels: int
    out_channels: int


class PerceptualExtractor:
    """Seeded random-weight feature stack: 3x3 stride-2 convolutions
    (3->16->32->64 channels) with ReLU; weights ~ N(0, 1) drawn once."""

    LAYERS = (ConvLayerSpec(3, 16), ConvLayerSpec(16, 32), ConvLayerSpec(32, 64))

    def __init__(self, weight_seed: int = 2024):
        self.weight_seed = weight_seed
        rng = np.random.default_rng(weight_seed)
        self.weights = []
        for spec in self.LAYERS:
            w = rng.standard_normal((spec.out_channels, spec.in_channels, 3, 3))
            # spatially zero-mean (band-pass) filters: a flat-patch response
            # shared by both inputs would otherwise dominate the normalized
            # feature direction and mask degradations
            w -= w.mean(axis=(2, 3), keepdims=True)
            self.weights.append(w)

    def features(self, pixels: np.ndarray) -> list[np.ndarray]:
        """Post-ReLU feature maps per layer for a (H, W, 3) image in [0, 1]."""
        x = pixels.astype(np.float64).transpose(2, 0, 1)  # (C, H, W)
        feats = []
        for w in self.weights:
            x = _conv3x3_stride2(x, w)
            x = np.maximum(x, 0.0)
            feats.append(x)
        return feats


def _conv3x3_stride2(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(C_in, H, W) -> (C_out, ceil(H/2), ceil(W/2)) with zero padding 1."""
    c_in, h, wd = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(1, 2))
    windows = windows[:, ::2, ::2]  # stride 2
    return np.einsum("chwij,ocij->ohw", windows, w)


def perceptual_distance(ref, deg, extractor: PerceptualExtractor) -> float:
    """Sum over layers of the spatial mean squared difference between
    channel-unit-normalized feature maps."""
    a, b = _pixels(ref), _pixels(deg)
    _check_same_shape(a, b)
    total = 0.0
    for fa, fb in zip(extractor.features(a), extractor.features(b)):
        na = fa / (np.linalg.norm(fa, axis=0, keepdims=True) + 1e-10)
        nb = fb / (np.linalg.norm(fb, axis=0, keepdims=True) + 1e-10)
        total += float(np.mean(np.sum((na - nb) ** 2, axis=0)))
    return total


def lpips_quality(d: float) -> float:
    return min(max(1.0 - d, 0.0), 1.0)


@dataclass(frozen=True)
class QualityTriplet:
    lpips_q: float
    psnr_q: float
    ssim_q: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lpips_q, self.psnr_q, self.ssim_q)


def quality_triplet(ref, deg, extractor: PerceptualExtractor) -> QualityTriplet:
    return QualityTriplet(
        lpips_q=lpips_quality(perceptual_distance(ref, deg, extractor)),
        psnr_q=normalize_psnr(psnr_db(ref, deg)),
        ssim_q=ssim_quality(ssim(ref, deg)),
    )
