import numpy as np
import pytest
import torch

from streamvq.errors import NumericError, ParameterError
from streamvq.labelgen import generate_labels
from streamvq.model import ModelConfig
from streamvq.train import (
    HISTORY_HEADER,
    TrainConfig,
    mae_loss,
    make_split,
    train_loop,
)


@pytest.fixture(scope="module")
def micro_table(fixture_manifest):
    return generate_labels(
        fixture_manifest,
        ["gaussian_blur", "jpeg_compression", "brightness",
         "gaussian_noise", "saturation", "color_jitter"],
        [0.0, 0.5, 1.0],
        seed=42,
        resize_to=(48, 48),
    )


MICRO_TRAIN = dict(
    clip_len=4,
    resolution=(48, 48),
    batch_size=2,
    learning_rate=1e-3,
    max_steps=6,
    seed=11,
)


def test_mae_loss_cases():
    zeros = torch.zeros(1, 2, 3)
    ones = torch.ones(1, 2, 3)
    assert float(mae_loss(ones, ones)) == 0.0
    assert float(mae_loss(zeros, ones)) == pytest.approx(1.0)
    pred = torch.tensor([[[0.5, 0.5, 0.5]]])
    target = torch.tensor([[[0.0, 1.0, 0.5]]])
    assert float(mae_loss(pred, target)) == pytest.approx(1 / 3)


def test_mae_loss_shape_mismatch():
    with pytest.raises(ParameterError):
        mae_loss(torch.zeros(1, 2, 3), torch.zeros(1, 3, 3))


def test_mae_loss_permutation_invariant_and_bounded():
    g = torch.Generator().manual_seed(0)
    pred = torch.rand(2, 5, 3, generator=g)
    target = torch.rand(2, 5, 3, generator=g)
    base = float(mae_loss(pred, target))
    perm = torch.randperm(5, generator=g)
    assert float(mae_loss(pred[:, perm], target[:, perm])) == pytest.approx(base)
    assert 0.0 <= base <= 1.0


def test_make_split_partitions_by_kind(micro_table):
    cfg = TrainConfig(**MICRO_TRAIN)
    train, val = make_split(micro_table, cfg)
    assert train.kinds() == {"gaussian_blur", "jpeg_compression", "brightness"}
    assert val.kinds() == {"gaussian_noise", "saturation", "color_jitter"}


def test_make_split_zero_amplitude_anchors(micro_table):
    cfg = TrainConfig(**MICRO_TRAIN)
    train, val = make_split(micro_table, cfg)
    for split in (train, val):
        anchors = [r for r in split.rows() if r.amplitude == 0.0]
        assert anchors
        assert all(abs(r.psnr_q - 1.0) < 1e-6 for r in anchors)


def test_make_split_missing_family(micro_table):
    only_train = micro_table.filter(lambda r: r.kind == "gaussian_blur")
    with pytest.raises(ParameterError):
        make_split(only_train, TrainConfig(**MICRO_TRAIN))


def test_disjoint_kind_families_enforced():
    with pytest.raises(ParameterError):
        TrainConfig(train_kinds=("gaussian_blur",), val_kinds=("gaussian_blur",))


def test_train_loop_runs_and_writes_history(fixture_manifest, micro_table, tmp_path):
    cfg = TrainConfig(**MICRO_TRAIN)
    best, history = train_loop(
        fixture_manifest, micro_table, ModelConfig(init_seed=1), cfg, str(tmp_path)
    )
    assert (tmp_path / "history.csv").read_text().splitlines()[0] == HISTORY_HEADER
    assert (tmp_path / "best.nvq").exists()
    assert (tmp_path / "last.nvq").exists()
    splits = {h.split for h in history}
    assert splits == {"train", "val"}


def test_train_determinism(fixture_manifest, micro_table, tmp_path):
    cfg = TrainConfig(**MICRO_TRAIN)
    _, hist_a = train_loop(
        fixture_manifest, micro_table, ModelConfig(init_seed=1), cfg, str(tmp_path / "a")
    )
    _, hist_b = train_loop(
        fixture_manifest, micro_table, ModelConfig(init_seed=1), cfg, str(tmp_path / "b")
    )
    assert [h.csv_row() for h in hist_a] == [h.csv_row() for h in hist_b]


def test_temporal_flag_yields_distinct_histories(fixture_manifest, micro_table, tmp_path):
    cfg = TrainConfig(**MICRO_TRAIN)
    _, hist_t = train_loop(
        fixture_manifest, micro_table, ModelConfig(init_seed=1), cfg, str(tmp_path / "t")
    )
    _, hist_b = train_loop(
        fixture_manifest,
        micro_table,
        ModelConfig(init_seed=1, temporal_enabled=False),
        cfg,
        str(tmp_path / "b"),
    )
    assert [h.csv_row() for h in hist_t] != [h.csv_row() for h in hist_b]


def test_resume_reproduces_uninterrupted_run(fixture_manifest, micro_table, tmp_path):
    steps_per_epoch = 3  # 6 train units / batch 2
    full_cfg = TrainConfig(**{**MICRO_TRAIN, "max_steps": 2 * steps_per_epoch})
    half_cfg = TrainConfig(**{**MICRO_TRAIN, "max_steps": steps_per_epoch})
    _, hist_full = train_loop(
        fixture_manifest, micro_table, ModelConfig(init_seed=1), full_cfg, str(tmp_path / "full")
    )
    train_loop(
        fixture_manifest, micro_table, ModelConfig(init_seed=1), half_cfg, str(tmp_path / "half")
    )
    _, hist_resumed = train_loop(
        fixture_manifest,
        micro_table,
        ModelConfig(init_seed=1),
        full_cfg,
        str(tmp_path / "resumed"),
        resume_from=str(tmp_path / "half" / "resume.pt"),
    )
    full_rows = [h.csv_row() for h in hist_full]
    resumed_rows = [h.csv_row() for h in hist_resumed]
    assert full_rows == resumed_rows


def test_nan_loss_aborts(fixture_manifest, micro_table, tmp_path, monkeypatch):
    import streamvq.train as train_mod

    class NaNModel(torch.nn.Module):
        config = ModelConfig()

        def __init__(self, _cfg):
            super().__init__()
            self.p = torch.nn.Parameter(torch.zeros(1))

        def forward(self, x, state=None):
            b, t = x.shape[:2]
            return torch.full((b, t, 3), float("nan")) + self.p, None

    monkeypatch.setattr(train_mod, "QualityPredictor", NaNModel)
    with pytest.raises(NumericError, match="non-finite"):
        train_loop(
            fixture_manifest,
            micro_table,
            ModelConfig(init_seed=1),
            TrainConfig(**MICRO_TRAIN),
            str(tmp_path),
        )
