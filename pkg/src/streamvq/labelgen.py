"""Per-frame ground-truth label tables over (clip x degradation x amplitude).

Tables round-trip losslessly through CSV (9 significant digits) and accept
externally computed perceptual scores via sidecar merge.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .dataio import DatasetManifest, load_clip
from .degrade import ALL_KINDS, DegradationSpec, apply_degradation
from .errors import DataError, ParameterError
from .metrics import PerceptualExtractor, quality_triplet

CSV_HEADER = "clip_id,frame_idx,kind,amplitude,seed,lpips_q,psnr_q,ssim_q,lpips_source"

DEFAULT_AMPLITUDE_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

Key = tuple[str, int, str, float, int]


@dataclass(frozen=True)
class LabelRow:
    clip_id: str
    frame_idx: int
    kind: str
    amplitude: float
    seed: int
    lpips_q: float
    psnr_q: float
    ssim_q: float
    lpips_source: str = "builtin"

    @property
    def key(self) -> Key:
        return (self.clip_id, self.frame_idx, self.kind, self.amplitude, self.seed)


class LabelTable:
    def __init__(self, rows=(), meta: dict | None = None):
        self._rows: dict[Key, LabelRow] = {}
        self.meta = dict(meta or {})
        for row in rows:
            self.add(row)

    def add(self, row: LabelRow) -> None:
        if row.key in self._rows:
            raise DataError(f"duplicate label key: {row.key}")
        for name in ("lpips_q", "psnr_q", "ssim_q"):
            v = getattr(row, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name}={v} out of [0, 1] for key {row.key}")
        self._rows[row.key] = row

    def rows(self) -> list[LabelRow]:
        return sorted(self._rows.values(), key=lambda r: r.key)

    def get(self, key: Key) -> LabelRow | None:
        return self._rows.get(key)

    def __len__(self) -> int:
        return len(self._rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelTable) and self._rows == other._rows

    def kinds(self) -> set[str]:
        return {r.kind for r in self._rows.values()}

    def filter(self, predicate) -> "LabelTable":
        return LabelTable(
            (r for r in self._rows.values() if predicate(r)), meta=self.meta
        )


def generate_labels(
    manifest: DatasetManifest,
    kinds: list[str],
    amplitudes: list[float],
    seed: int,
    extractor: PerceptualExtractor | None = None,
    resize_to: tuple[int, int] | None = None,
) -> LabelTable:
    """One row per (clip, frame, kind, amplitude), triplets computed against
    the pristine frame. Unloadable clips are skipped and recorded in meta."""
    if not manifest.entries:
        raise ParameterError("manifest is empty")
    for kind in kinds:
        if kind not in ALL_KINDS:
            raise ParameterError(f"unknown degradation kind: {kind!r}")
    if any(not 0.0 <= a <= 1.0 for a in amplitudes):
        raise ParameterError("amplitudes must be in [0, 1]")

    extractor = extractor or PerceptualExtractor()
    table = LabelTable(meta={"extractor_seed": str(extractor.weight_seed)})
    skipped = []
    for entry in manifest.entries:
        try:
            clip = load_clip(manifest, entry.clip_id, resize_to=resize_to)
        except DataError as exc:
            skipped.append(f"{entry.clip_id}: {exc}")
            continue
        for kind in kinds:
            for amplitude in amplitudes:
                spec = DegradationSpec(kind, amplitude, seed)
                degraded = apply_degradation(clip, spec)
                for ref, deg in zip(clip.frames, degraded.frames):
                    t = quality_triplet(ref, deg, extractor)
                    table.add(
                        LabelRow(
                            clip_id=entry.clip_id,
                            frame_idx=ref.frame_idx,
                            kind=kind,
                            amplitude=amplitude,
                            seed=seed,
                            lpips_q=t.lpips_q,
                            psnr_q=t.psnr_q,
                            ssim_q=t.ssim_q,
                        )
                    )
    if skipped:
        table.meta["skipped"] = "; ".join(skipped)
    return table


def _format_real(x: float) -> str:
    return f"{x:.9g}"


def export_csv(table: LabelTable, path: str, meta: dict | None = None) -> None:
    meta = meta if meta is not None else None
    lines = []
    if meta:
        pairs = ";".join(f"{k}={v}" for k, v in meta.items())
        lines.append(f"# meta: {pairs}")
    lines.append(CSV_HEADER)
    for r in table.rows():
        lines.append(
            ",".join(
                [
                    r.clip_id,
                    str(r.frame_idx),
                    r.kind,
                    _format_real(r.amplitude),
                    str(r.seed),
                    _format_real(r.lpips_q),
                    _format_real(r.psnr_q),
                    _format_real(r.ssim_q),
                    r.lpips_source,
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def import_csv(path: str) -> LabelTable:
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read label CSV {path}: {exc}") from exc

    meta: dict[str, str] = {}
    idx = 0
    if lines and lines[0].startswith("# meta:"):
        for pair in lines[0][len("# meta:") :].strip().split(";"):
            if "=" in pair:
                k, v = pair.split("=", 1)
                meta[k.strip()] = v.strip()
        idx = 1
    if idx >= len(lines) or lines[idx] != CSV_HEADER:
        raise DataError(f"{path}: missing or wrong header at line {idx + 1}")

    table = LabelTable(meta=meta)
    for lineno, line in enumerate(lines[idx + 1 :], start=idx + 2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 9:
            raise DataError(f"{path}:{lineno}: expected 9 fields, got {len(parts)}")
        try:
            row = LabelRow(
                clip_id=parts[0],
                frame_idx=int(parts[1]),
                kind=parts[2],
                amplitude=float(parts[3]),
                seed=int(parts[4]),
                lpips_q=float(parts[5]),
                psnr_q=float(parts[6]),
                ssim_q=float(parts[7]),
                lpips_source=parts[8],
            )
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed row: {exc}") from exc
        try:
            table.add(row)
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return table


def merge_external_lpips(
    table: LabelTable, sidecar: LabelTable
) -> tuple[LabelTable, list[Key]]:
    """Replace lpips_q for keys present in the sidecar; psnr_q/ssim_q untouched.

    Returns the merged table and the sidecar keys that matched nothing.
    """
    merged = LabelTable(meta=table.meta)
    unmatched = []
    updates = {}
    for s in sidecar.rows():
        if table.get(s.key) is None:
            unmatched.append(s.key)
        else:
            updates[s.key] = s.lpips_q
    for r in table.rows():
        if r.key in updates:
            r = replace(r, lpips_q=updates[r.key], lpips_source="external")
        merged.add(r)
    return merged, unmatched


def impact_curve(
    table: LabelTable, kind: str
) -> list[tuple[float, float, float, float]]:
    """Per-amplitude means of (lpips_q, psnr_q, ssim_q), ascending amplitude."""
    by_amp: dict[float, list[LabelRow]] = {}
    for r in table.rows():
        if r.kind == kind:
            by_amp.setdefault(r.amplitude, []).append(r)
    curve = []
    for amp in sorted(by_amp):
        rows = by_amp[amp]
        n = len(rows)
        curve.append(
            (
                amp,
                sum(r.lpips_q for r in rows) / n,
                sum(r.psnr_q for r in rows) / n,
                sum(r.ssim_q for r in rows) / n,
            )
        )
    return curve
