import numpy as np
import pytest

from streamvq.dataio import Clip
from streamvq.degrade import (
    ALL_KINDS,
    DegradationSpec,
    amplitude_sweep,
    apply_degradation,
)
from streamvq.errors import ParameterError
from streamvq.metrics import normalize_psnr, psnr_db

from conftest import natural_clip


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_identity_at_zero_amplitude(fixture_clip, kind):
    out = apply_degradation(fixture_clip, DegradationSpec(kind, 0.0, 42))
    for a, b in zip(fixture_clip.frames, out.frames):
        assert np.array_equal(a.pixels, b.pixels)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_bit_determinism(fixture_clip, kind):
    spec = DegradationSpec(kind, 0.7, 123)
    a = apply_degradation(fixture_clip, spec)
    b = apply_degradation(fixture_clip, spec)
    for fa, fb in zip(a.frames, b.frames):
        assert np.array_equal(fa.pixels, fb.pixels)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("amplitude", [0.25, 1.0])
def test_range_safety(fixture_clip, kind, amplitude):
    out = apply_degradation(fixture_clip, DegradationSpec(kind, amplitude, 9))
    arr = out.to_array()
    assert arr.min() >= 0.0 and arr.max() <= 1.0
    assert arr.shape == fixture_clip.to_array().shape


def test_amplitude_out_of_range():
    with pytest.raises(ParameterError):
        DegradationSpec("gaussian_blur", 1.5, 0)
    with pytest.raises(ParameterError):
        DegradationSpec("gaussian_blur", -0.1, 0)


def test_unknown_kind():
    with pytest.raises(ParameterError):
        DegradationSpec("motion_blur", 0.5, 0)


def test_sweep_single_identity(fixture_clip):
    sweep = amplitude_sweep(fixture_clip, "gaussian_blur", [0.0], seed=5)
    assert len(sweep) == 1
    assert np.array_equal(sweep[0][1].to_array(), fixture_clip.to_array())


def test_sweep_unsorted_grid(fixture_clip):
    with pytest.raises(ParameterError):
        amplitude_sweep(fixture_clip, "gaussian_blur", [0.5, 0.2], seed=5)


def test_sweep_amplitudes_returned(fixture_clip):
    sweep = amplitude_sweep(fixture_clip, "gaussian_blur", [0.0, 0.5, 1.0], seed=5)
    assert [a for a, _ in sweep] == [0.0, 0.5, 1.0]


def _mean_psnr_q(ref: Clip, deg: Clip) -> float:
    vals = [
        normalize_psnr(psnr_db(a, b)) for a, b in zip(ref.frames, deg.frames)
    ]
    return float(np.mean(vals))


@pytest.mark.parametrize("kind", ["gaussian_blur", "gaussian_noise"])
def test_monotone_psnr_along_grid(fixture_clip, kind):
    grid = [i / 10 for i in range(11)]
    sweep = amplitude_sweep(fixture_clip, kind, grid, seed=21)
    scores = [_mean_psnr_q(fixture_clip, deg) for _, deg in sweep]
    for prev, cur in zip(scores, scores[1:]):
        assert cur <= prev + 0.01


def test_heavy_noise_collapses_psnr(fixture_clip):
    deg = apply_degradation(fixture_clip, DegradationSpec("gaussian_noise", 1.0, 3))
    assert _mean_psnr_q(fixture_clip, deg) < 0.10


@pytest.mark.parametrize("kind", ["gaussian_blur", "jpeg_compression", "saturation", "brightness"])
def test_frame_independence_of_spatial_kinds(kind):
    clip = natural_clip(11, "ind", frames=5)
    spec = DegradationSpec(kind, 0.6, 77)
    full = apply_degradation(clip, spec)
    # same frame degraded inside a shorter clip with the same identity
    partial = Clip(clip.frames[2:3], clip.clip_id)
    alone = apply_degradation(partial, spec)
    assert np.array_equal(full.frames[2].pixels, alone.frames[0].pixels)


def test_empty_clip_rejected():
    with pytest.raises(ParameterError):
        apply_degradation(Clip((), "empty"), DegradationSpec("gaussian_blur", 0.5, 0))
