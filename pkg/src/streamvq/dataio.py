"""Frame-sequence dataset loading, manifests, and chunking for streaming."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError, ParameterError

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png"}

MIN_FRAME_SIDE = 32  # three stride-2 reductions plus pooling need at least this


@dataclass(frozen=True)
class Frame:
    pixels: np.ndarray  # (H, W, 3) float32 in [0, 1]
    clip_id: str
    frame_idx: int

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Clip:
    frames: tuple[Frame, ...]
    clip_id: str
    fps_hint: float | None = None

    def __len__(self) -> int:
        return len(self.frames)

    def to_array(self) -> np.ndarray:
        """Stack frames into a (T, H, W, 3) float32 array."""
        return np.stack([f.pixels for f in self.frames], axis=0)


@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    path: str
    frames: int
    height: int
    width: int


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    role: str = "train"
    warnings: list[str] = field(default_factory=list)

    def clip_ids(self) -> list[str]:
        return [e.clip_id for e in self.entries]

    def get(self, clip_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.clip_id == clip_id:
                return e
        raise DataError(f"clip_id not in manifest: {clip_id!r}")


@dataclass(frozen=True)
class Chunk:
    start: int
    stop: int  # exclusive
    frames: tuple[Frame, ...]


def _frame_key(name: str):
    stem = os.path.splitext(name)[0]
    return (0, int(stem)) if stem.isdigit() else (1, stem)


def _list_frame_files(clip_dir: str) -> list[str]:
    names = [
        n
        for n in os.listdir(clip_dir)
        if os.path.splitext(n)[1].lower() in IMAGE_EXTENSIONS
    ]
    return sorted(names, key=_frame_key)


def _probe_image(path: str) -> tuple[int, int] | None:
    """Return (H, W) from the image header, or None if undecodable."""
    try:
        with Image.open(path) as im:
            return im.height, im.width
    except (UnidentifiedImageError, OSError):
        return None


def scan_dataset(root_path: str, layout: str = "davis_style", role: str = "train") -> DatasetManifest:
    """Enumerate clip directories under ``root_path`` into a manifest.

    ``davis_style`` expects ``<root>/<clip_id>/<NNNNN>.{jpg,png}``;
    ``flat`` treats ``root_path`` itself as a single clip directory.
    Clips with fewer than 2 decodable frames are skipped with a warning;
    clips mixing frame dimensions are rejected with a diagnostic.
    """
    if layout not in ("davis_style", "flat"):
        raise ParameterError(f"unknown layout: {layout!r}")
    if not os.path.isdir(root_path):
        raise DataError(f"dataset root does not exist: {root_path}")

    if layout == "flat":
        clip_dirs = [(os.path.basename(os.path.normpath(root_path)), root_path)]
    else:
        clip_dirs = sorted(
            (name, os.path.join(root_path, name))
            for name in os.listdir(root_path)
            if os.path.isdir(os.path.join(root_path, name))
        )

    entries: list[ManifestEntry] = []
    warnings: list[str] = []
    for clip_id, clip_dir in clip_dirs:
        names = _list_frame_files(clip_dir)
        sizes = []
        decodable = []
        for name in names:
            size = _probe_image(os.path.join(clip_dir, name))
            if size is not None:
                sizes.append(size)
                decodable.append(name)
        if len(decodable) < 2:
            warnings.append(f"clip {clip_id!r} skipped: {len(decodable)} decodable frames")
            continue
        if len(set(sizes)) > 1:
            warnings.append(
                f"clip {clip_id!r} rejected: mixed frame dimensions {sorted(set(sizes))}"
            )
            continue
        h, w = sizes[0]
        entries.append(ManifestEntry(clip_id, clip_dir, len(decodable), h, w))

    entries.sort(key=lambda e: e.clip_id)
    return DatasetManifest(entries=entries, role=role, warnings=warnings)


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    payload = [
        {
            "clip_id": e.clip_id,
            "path": e.path,
            "frames": e.frames,
            "height": e.height,
            "width": e.width,
            "role": manifest.role,
        }
        for e in manifest.entries
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def load_manifest(path: str) -> DatasetManifest:
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    entries = [
        ManifestEntry(d["clip_id"], d["path"], d["frames"], d["height"], d["width"])
        for d in payload
    ]
    role = payload[0]["role"] if payload else "train"
    return DatasetManifest(entries=entries, role=role)


def _decode_frame(path: str) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"cannot decode frame file {path}: {exc}") from exc


def load_clip(
    manifest: DatasetManifest,
    clip_id: str,
    resize_to: tuple[int, int] | None = None,
) -> Clip:
    """Decode a clip's frames to RGB float32 in [0, 1], optionally resized (bilinear)."""
    entry = manifest.get(clip_id)
    names = _list_frame_files(entry.path)
    frames = []
    for idx, name in enumerate(names):
        path = os.path.join(entry.path, name)
        if resize_to is not None:
            h, w = resize_to
            try:
                with Image.open(path) as im:
                    im = im.convert("RGB").resize((w, h), Image.BILINEAR)
                    pixels = np.asarray(im, dtype=np.float32) / 255.0
            except (UnidentifiedImageError, OSError) as exc:
                raise DataError(f"cannot decode frame file {path}: {exc}") from exc
        else:
            pixels = _decode_frame(path)
        frames.append(Frame(pixels=pixels, clip_id=clip_id, frame_idx=idx))
    return Clip(frames=tuple(frames), clip_id=clip_id)


def chunk_clip(clip: Clip, chunk_len: int, overlap: int = 0) -> list[Chunk]:
    """Split a clip into chunks of ``chunk_len`` frames with ``overlap`` shared frames.

    Chunk k starts at ``k * (chunk_len - overlap)``; the final chunk may be
    shorter. The non-overlap "primary regions" tile [0, T) exactly once.
    """
    return [
        Chunk(start, stop, clip.frames[start:stop])
        for start, stop in chunk_ranges(len(clip), chunk_len, overlap)
    ]


def chunk_ranges(total: int, chunk_len: int, overlap: int = 0) -> list[tuple[int, int]]:
    if chunk_len < 1:
        raise ParameterError(f"chunk_len must be >= 1, got {chunk_len}")
    if overlap < 0 or overlap >= chunk_len:
        raise ParameterError(f"overlap must satisfy 0 <= overlap < chunk_len, got {overlap}")
    stride = chunk_len - overlap
    ranges: list[tuple[int, int]] = []
    start = 0
    while start < total:
        stop = min(start + chunk_len, total)
        ranges.append((start, stop))
        if stop >= total:
            break
        start += stride
    return ranges
