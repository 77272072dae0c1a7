"""Streaming video quality network.

A reduced three-layer ResNet encoder produces multiscale features per frame;
the three shallower scales are spatially subsampled and run through
per-position LSTMs with shared weights (unidirectional, so predictions are
causal); pooled features feed an MLP with a sigmoid head that emits one
(lpips_q, psnr_q, ssim_q) triplet per frame. Hidden state can be carried
across chunks so chunked inference matches a full-sequence pass.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass, field

import torch
from torch import nn

from .errors import (
    CheckpointFormatError,
    CheckpointIntegrityError,
    ConfigMismatchError,
    ParameterError,
)

CHECKPOINT_MAGIC = b"NVQ1"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    stem_channels: int = 32
    encoder_channels: tuple[int, int, int] = (32, 64, 128)
    lstm_hidden: tuple[int, int, int] = (32, 32, 64)
    mlp_hidden: tuple[int, int] = (256, 128)
    mlp_in: int | None = None  # None = inferred from channel arithmetic
    dropout: float = 0.1
    subsample: int = 2
    temporal_enabled: bool = True
    lstm_group_size: int = 1024  # memory batching only; no numerical effect
    init_seed: int = 0

    def pooled_width(self) -> int:
        if self.temporal_enabled:
            scale_ch = sum(self.lstm_hidden)
        else:
            scale_ch = self.stem_channels + self.encoder_channels[0] + self.encoder_channels[1]
        return scale_ch + self.encoder_channels[2]

    def resolved_mlp_in(self) -> int:
        width = self.pooled_width()
        if self.mlp_in is not None and self.mlp_in != width:
            raise ParameterError(
                f"mlp_in={self.mlp_in} does not match pooled feature width {width}"
            )
        return width


class BasicBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_ch != out_ch:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


class MultiscaleEncoder(nn.Module):
    """Stem (7x7 stride-2 conv, BN, ReLU, 3x3 stride-2 maxpool) plus three
    two-block residual stages; exposes x1 (post-stem) through x4."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c1, c2, c3 = cfg.encoder_channels
        self.stem = nn.Sequential(
            nn.Conv2d(3, cfg.stem_channels, 7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(cfg.stem_channels),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, stride=2, padding=1),
        )
        self.layer1 = nn.Sequential(
            BasicBlock(cfg.stem_channels, c1), BasicBlock(c1, c1)
        )
        self.layer2 = nn.Sequential(BasicBlock(c1, c2, stride=2), BasicBlock(c2, c2))
        self.layer3 = nn.Sequential(BasicBlock(c2, c3, stride=2), BasicBlock(c3, c3))

    def forward(self, x):
        if x.shape[-2] % 16 or x.shape[-1] % 16:
            raise ParameterError(
                f"frame dimensions must be divisible by 16, got {tuple(x.shape[-2:])}"
            )
        x1 = self.stem(x)
        x2 = self.layer1(x1)
        x3 = self.layer2(x2)
        x4 = self.layer3(x3)
        return x1, x2, x3, x4


@dataclass
class TemporalState:
    """Per-scale LSTM (hidden, cell) pairs, one row per spatial position."""

    scales: list[tuple[torch.Tensor, torch.Tensor]] = field(default_factory=list)

    def detach(self) -> "TemporalState":
        return TemporalState([(h.detach(), c.detach()) for h, c in self.scales])


class SpatialLSTM(nn.Module):
    """One shared-weight LSTM applied independently to every spatial position.

    Positions are processed in groups to bound memory; group size does not
    change the numbers.
    """

    def __init__(self, in_ch: int, hidden: int, group_size: int):
        super().__init__()
        self.lstm = nn.LSTM(in_ch, hidden, num_layers=1, batch_first=True)
        self.hidden = hidden
        self.group_size = group_size

    def forward(self, feats, state=None):
        # feats: (b, t, C, H, W) -> (b, t, hidden, H, W)
        b, t, c, h, w = feats.shape
        seq = feats.permute(0, 3, 4, 1, 2).reshape(b * h * w, t, c)
        n = seq.shape[0]
        if state is None:
            state = (
                feats.new_zeros(n, self.hidden),
                feats.new_zeros(n, self.hidden),
            )
        h0, c0 = state
        if h0.shape != (n, self.hidden):
            raise ParameterError(
                f"temporal state shape {tuple(h0.shape)} does not match "
                f"{(n, self.hidden)} positions x hidden"
            )
        outs, hs, cs = [], [], []
        for lo in range(0, n, self.group_size):
            hi = min(lo + self.group_size, n)
            out, (hn, cn) = self.lstm(
                seq[lo:hi],
                (h0[lo:hi].unsqueeze(0).contiguous(), c0[lo:hi].unsqueeze(0).contiguous()),
            )
            outs.append(out)
            hs.append(hn.squeeze(0))
            cs.append(cn.squeeze(0))
        out = torch.cat(outs, dim=0)
        out = out.reshape(b, h, w, t, self.hidden).permute(0, 3, 4, 1, 2)
        return out, (torch.cat(hs, dim=0), torch.cat(cs, dim=0))


class QualityPredictor(nn.Module):
    """NR video quality model: encoder + per-scale temporal LSTMs + MLP head."""

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = config or ModelConfig()
        cfg = self.config
        mlp_in = cfg.resolved_mlp_in()
        with torch.random.fork_rng():
            torch.manual_seed(cfg.init_seed)
            self.encoder = MultiscaleEncoder(cfg)
            if cfg.temporal_enabled:
                in_chs = (cfg.stem_channels, cfg.encoder_channels[0], cfg.encoder_channels[1])
                self.temporal = nn.ModuleList(
                    SpatialLSTM(ic, hd, cfg.lstm_group_size)
                    for ic, hd in zip(in_chs, cfg.lstm_hidden)
                )
            else:
                self.temporal = None
            m1, m2 = cfg.mlp_hidden
            self.head = nn.Sequential(
                nn.Linear(mlp_in, m1),
                nn.ReLU(inplace=True),
                nn.Dropout(cfg.dropout),
                nn.Linear(m1, m2),
                nn.ReLU(inplace=True),
                nn.Dropout(cfg.dropout),
                nn.Linear(m2, 3),
                nn.Sigmoid(),
            )
            self._init_weights()

    def _init_weights(self):
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            elif isinstance(m, nn.Linear):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
                nn.init.zeros_(m.bias)

    def encode(self, frames: torch.Tensor):
        """(b*t, 3, H, W) -> multiscale feature maps x1..x4."""
        return self.encoder(frames)

    def _subsample(self, x: torch.Tensor) -> torch.Tensor:
        s = self.config.subsample
        return x[..., ::s, ::s]

    def temporal_forward(self, scale_feats, state: TemporalState | None = None):
        """Run each subsampled scale through its LSTM, carrying (h, c)."""
        if self.temporal is None:
            raise ParameterError("temporal stage disabled in this configuration")
        prev = state.scales if state is not None else [None] * len(self.temporal)
        if len(prev) != len(self.temporal):
            raise ParameterError("temporal state has wrong number of scales")
        outs, new_scales = [], []
        for feats, lstm, st in zip(scale_feats, self.temporal, prev):
            out, (hn, cn) = lstm(feats, st)
            outs.append(out)
            new_scales.append((hn, cn))
        return outs, TemporalState(new_scales)

    def predict(self, temporal_feats, x4: torch.Tensor) -> torch.Tensor:
        """Pool each (b, t, C, H, W) map over space, concat, and run the MLP."""
        pooled = [f.mean(dim=(-2, -1)) for f in temporal_feats]
        pooled.append(x4.mean(dim=(-2, -1)))
        return self.head(torch.cat(pooled, dim=-1))

    def forward(self, clips: torch.Tensor, state: TemporalState | None = None):
        """(b, t, 3, H, W) -> ((b, t, 3) qualities, updated TemporalState)."""
        if clips.dim() != 5:
            raise ParameterError(f"expected (b, t, 3, H, W) input, got {tuple(clips.shape)}")
        b, t = clips.shape[:2]
        x1, x2, x3, x4 = self.encode(clips.reshape(b * t, *clips.shape[2:]))
        per_scale = [
            self._subsample(x.reshape(b, t, *x.shape[1:])) for x in (x1, x2, x3)
        ]
        x4 = x4.reshape(b, t, *x4.shape[1:])
        if self.config.temporal_enabled:
            temporal_feats, new_state = self.temporal_forward(per_scale, state)
        else:
            temporal_feats, new_state = per_scale, TemporalState([])
        return self.predict(temporal_feats, x4), new_state


def save_checkpoint(model: QualityPredictor, path: str) -> None:
    """Binary checkpoint: magic, version, config JSON, named f32 tensors,
    sha256 trailer."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<H", CHECKPOINT_VERSION))
    cfg_json = json.dumps(asdict(model.config), sort_keys=True).encode()
    buf.write(struct.pack("<I", len(cfg_json)))
    buf.write(cfg_json)
    state = model.state_dict()
    buf.write(struct.pack("<I", len(state)))
    for name, tensor in state.items():
        data = tensor.detach().to(torch.float32).contiguous()
        name_b = name.encode()
        buf.write(struct.pack("<H", len(name_b)))
        buf.write(name_b)
        buf.write(struct.pack("<B", data.dim()))
        for d in data.shape:
            buf.write(struct.pack("<I", d))
        buf.write(data.numpy().astype("<f4").tobytes())
    payload = buf.getvalue()
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as f:
        f.write(payload)
        f.write(digest)


def _dataclass_config(d: dict) -> ModelConfig:
    d = dict(d)
    for key in ("encoder_channels", "lstm_hidden", "mlp_hidden"):
        d[key] = tuple(d[key])
    return ModelConfig(**d)


def load_checkpoint(path: str, expected_config: ModelConfig | None = None) -> QualityPredictor:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic")
    if len(blob) < 38:
        raise CheckpointIntegrityError(f"{path}: truncated checkpoint")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointIntegrityError(f"{path}: checksum mismatch")
    buf = io.BytesIO(payload)
    buf.seek(4)
    (version,) = struct.unpack("<H", buf.read(2))
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    (cfg_len,) = struct.unpack("<I", buf.read(4))
    config = _dataclass_config(json.loads(buf.read(cfg_len).decode()))
    if expected_config is not None and config != expected_config:
        raise ConfigMismatchError(
            f"{path}: stored config does not match the expected one"
        )
    model = QualityPredictor(config)
    reference = model.state_dict()
    (n_tensors,) = struct.unpack("<I", buf.read(4))
    if n_tensors != len(reference):
        raise CheckpointIntegrityError(
            f"{path}: expected {len(reference)} tensors, found {n_tensors}"
        )
    loaded = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack("<H", buf.read(2))
        name = buf.read(name_len).decode()
        (ndim,) = struct.unpack("<B", buf.read(1))
        shape = struct.unpack(f"<{ndim}I", buf.read(4 * ndim)) if ndim else ()
        count = 1
        for d in shape:
            count *= d
        raw = buf.read(4 * count)
        if len(raw) != 4 * count:
            raise CheckpointIntegrityError(f"{path}: truncated tensor {name}")
        if name not in reference:
            raise CheckpointIntegrityError(f"{path}: unexpected tensor {name}")
        if tuple(reference[name].shape) != shape:
            raise CheckpointIntegrityError(
                f"{path}: tensor {name} shape {shape} != {tuple(reference[name].shape)}"
            )
        tensor = torch.frombuffer(bytearray(raw), dtype=torch.float32).reshape(shape)
        loaded[name] = tensor.to(reference[name].dtype)
    model.load_state_dict(loaded)
    return model
