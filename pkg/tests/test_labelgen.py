import numpy as np
import pytest

from streamvq.dataio import DatasetManifest, load_clip
from streamvq.degrade import DegradationSpec, apply_degradation
from streamvq.errors import DataError, ParameterError
from streamvq.labelgen import (
    CSV_HEADER,
    LabelRow,
    LabelTable,
    export_csv,
    generate_labels,
    impact_curve,
    import_csv,
    merge_external_lpips,
)
from streamvq.metrics import PerceptualExtractor, quality_triplet


@pytest.fixture(scope="module")
def one_clip_manifest(fixture_manifest):
    return DatasetManifest(entries=fixture_manifest.entries[:1], role="train")


@pytest.fixture(scope="module")
def small_table(one_clip_manifest):
    return generate_labels(
        one_clip_manifest, ["gaussian_blur", "gaussian_noise"], [0.0, 0.5, 1.0], seed=42
    )


def test_cardinality(small_table):
    # 1 clip x 10 frames x 2 kinds x 3 amplitudes
    assert len(small_table) == 60


def test_zero_amplitude_rows_are_unity(small_table):
    for row in small_table.rows():
        if row.amplitude == 0.0:
            assert row.lpips_q == pytest.approx(1.0, abs=1e-6)
            assert row.psnr_q == pytest.approx(1.0, abs=1e-6)
            assert row.ssim_q == pytest.approx(1.0, abs=1e-6)


def test_regeneration_is_byte_identical(one_clip_manifest, small_table, tmp_path):
    again = generate_labels(
        one_clip_manifest, ["gaussian_blur", "gaussian_noise"], [0.0, 0.5, 1.0], seed=42
    )
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    export_csv(small_table, str(p1))
    export_csv(again, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_labels_reproducible_from_spec(one_clip_manifest, small_table):
    # spot-check rows against recomputing the metric triplet from (seed, spec)
    extractor = PerceptualExtractor()
    rows = small_table.rows()
    rng = np.random.default_rng(0)
    clip = load_clip(one_clip_manifest, one_clip_manifest.entries[0].clip_id)
    for row in (rows[i] for i in rng.choice(len(rows), size=20, replace=False)):
        degraded = apply_degradation(
            clip, DegradationSpec(row.kind, row.amplitude, row.seed)
        )
        t = quality_triplet(
            clip.frames[row.frame_idx], degraded.frames[row.frame_idx], extractor
        )
        assert t.lpips_q == pytest.approx(row.lpips_q, abs=1e-6)
        assert t.psnr_q == pytest.approx(row.psnr_q, abs=1e-6)
        assert t.ssim_q == pytest.approx(row.ssim_q, abs=1e-6)


def test_csv_roundtrip(small_table, tmp_path):
    path = tmp_path / "labels.csv"
    export_csv(small_table, str(path))
    assert path.read_text().splitlines()[0] == CSV_HEADER
    again = import_csv(str(path))
    export_again = tmp_path / "again.csv"
    export_csv(again, str(export_again))
    assert path.read_bytes() == export_again.read_bytes()


def test_csv_meta_line(small_table, tmp_path):
    path = tmp_path / "labels.csv"
    export_csv(small_table, str(path), meta={"backbone": "builtin", "tool": "streamvq"})
    text = path.read_text().splitlines()
    assert text[0].startswith("# meta:")
    table = import_csv(str(path))
    assert table.meta["backbone"] == "builtin"


def test_import_rejects_out_of_range(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(CSV_HEADER + "\nc,0,gaussian_blur,0.5,1,1.2,0.5,0.5,builtin\n")
    with pytest.raises(DataError, match="2"):
        import_csv(str(path))


def test_import_rejects_duplicate_key(tmp_path):
    row = "c,0,gaussian_blur,0.5,1,0.5,0.5,0.5,builtin"
    path = tmp_path / "dup.csv"
    path.write_text(CSV_HEADER + f"\n{row}\n{row}\n")
    with pytest.raises(DataError, match="duplicate"):
        import_csv(str(path))


def test_import_rejects_malformed_row(tmp_path):
    path = tmp_path / "mal.csv"
    path.write_text(CSV_HEADER + "\nc,zero,gaussian_blur,0.5,1,0.5,0.5,0.5,builtin\n")
    with pytest.raises(DataError, match="malformed"):
        import_csv(str(path))


def _sidecar_from(table: LabelTable, value=0.33):
    rows = [
        LabelRow(
            r.clip_id, r.frame_idx, r.kind, r.amplitude, r.seed,
            lpips_q=value, psnr_q=r.psnr_q, ssim_q=r.ssim_q, lpips_source="external",
        )
        for r in table.rows()
    ]
    return LabelTable(rows)


def test_merge_all_matched(small_table):
    sidecar = _sidecar_from(small_table)
    merged, unmatched = merge_external_lpips(small_table, sidecar)
    assert unmatched == []
    for row in merged.rows():
        assert row.lpips_q == 0.33
        assert row.lpips_source == "external"
        # psnr/ssim untouched
        orig = small_table.get(row.key)
        assert row.psnr_q == orig.psnr_q and row.ssim_q == orig.ssim_q


def test_merge_empty_sidecar(small_table):
    merged, unmatched = merge_external_lpips(small_table, LabelTable())
    assert unmatched == []
    assert merged == small_table


def test_merge_reports_stale_key(small_table):
    sidecar = _sidecar_from(small_table)
    stale = LabelRow("ghost", 0, "gaussian_blur", 0.5, 42, 0.5, 0.5, 0.5, "external")
    rows = sidecar.rows()[:-1] + [stale]
    merged, unmatched = merge_external_lpips(small_table, LabelTable(rows))
    assert unmatched == [stale.key]
    updated = [r for r in merged.rows() if r.lpips_source == "external"]
    assert len(updated) == 59


def test_merge_preserves_key_uniqueness(small_table):
    merged, _ = merge_external_lpips(small_table, _sidecar_from(small_table))
    assert len(merged) == len(small_table)


def test_impact_curve_zero_point(small_table):
    curve = impact_curve(small_table, "gaussian_blur")
    amp0 = curve[0]
    assert amp0[0] == 0.0
    assert all(v == pytest.approx(1.0, abs=1e-6) for v in amp0[1:])
    assert [c[0] for c in curve] == [0.0, 0.5, 1.0]


def test_impact_curve_absent_kind(small_table):
    assert impact_curve(small_table, "saturation") == []


def test_generate_labels_validates_inputs(one_clip_manifest):
    with pytest.raises(ParameterError):
        generate_labels(DatasetManifest(entries=[]), ["gaussian_blur"], [0.5], 1)
    with pytest.raises(ParameterError):
        generate_labels(one_clip_manifest, ["bad_kind"], [0.5], 1)
    with pytest.raises(ParameterError):
        generate_labels(one_clip_manifest, ["gaussian_blur"], [1.5], 1)
