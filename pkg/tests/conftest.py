import numpy as np
import pytest
from PIL import Image
from scipy.ndimage import gaussian_filter

from streamvq.dataio import Clip, Frame, scan_dataset


def natural_frame(rng: np.random.Generator, h: int = 64, w: int = 64) -> np.ndarray:
    """Procedural stand-in for a natural frame: smooth color field plus
    band-limited luma texture, values kept inside [0, 1]."""
    base = rng.random((6, 6, 3))
    base = np.kron(base, np.ones((h // 6 + 1, w // 6 + 1, 1)))[:h, :w]
    base = gaussian_filter(base, (4, 4, 0))
    tex = gaussian_filter(rng.standard_normal((h, w, 1)), (1.2, 1.2, 0)) * 0.35
    return np.clip(0.15 + 0.7 * base + tex, 0.0, 1.0).astype(np.float32)


def natural_clip(seed: int, clip_id: str, frames: int = 10, h: int = 64, w: int = 64) -> Clip:
    rng = np.random.default_rng(seed)
    # slight per-frame drift so the clip is not static
    base = natural_frame(rng, h, w)
    out = []
    for t in range(frames):
        drift = gaussian_filter(rng.standard_normal((h, w, 1)), (3, 3, 0)) * 0.03
        pixels = np.clip(base + drift, 0.0, 1.0).astype(np.float32)
        out.append(Frame(pixels, clip_id, t))
    return Clip(tuple(out), clip_id)


def write_clip_dir(clip: Clip, clip_dir) -> None:
    clip_dir.mkdir(parents=True, exist_ok=True)
    for frame in clip.frames:
        img = Image.fromarray(np.round(frame.pixels * 255.0).astype(np.uint8))
        img.save(clip_dir / f"{frame.frame_idx:05d}.png")


def build_dataset(root, n_clips: int, frames: int, h: int, w: int, seed0: int = 100):
    for i in range(n_clips):
        clip = natural_clip(seed0 + i, f"clip{i:02d}", frames, h, w)
        write_clip_dir(clip, root / f"clip{i:02d}")
    return scan_dataset(str(root))


@pytest.fixture(scope="session")
def fixture_root(tmp_path_factory):
    """Two 10-frame 64x64 clips on disk (davis-style layout)."""
    root = tmp_path_factory.mktemp("fixture_clips")
    build_dataset(root, 2, 10, 64, 64)
    return root


@pytest.fixture(scope="session")
def fixture_manifest(fixture_root):
    return scan_dataset(str(fixture_root))


@pytest.fixture(scope="session")
def fixture_clip():
    """In-memory 4-frame 64x64 clip for metric-level tests."""
    return natural_clip(7, "fix", frames=4)
