export const CSV_HEADER =
  'clip_id,frame_idx,kind,amplitude,seed,lpips_q,psnr_q,ssim_q,lpips_source';

/** Format a real with 9 significant digits, printf %.9g style. */
export function formatReal(x: number): string {
  if (Number.isInteger(x) && Math.abs(x) < 1e9) return String(x);
  const precise = x.toPrecision(9);
  if (precise.includes('e')) {
    const [mantissa, exponent] = precise.split('e');
    const trimmed = mantissa.replace(/\.?0+$/, '');
    const expNum = Number(exponent);
    const expStr = (expNum < 0 ? '-' : '+') + String(Math.abs(expNum)).padStart(2, '0');
    return `${trimmed}e${expStr}`;
  }
  return precise.includes('.') ? precise.replace(/\.?0+$/, '') : precise;
}

export interface SidecarRow {
  clipId: string;
  frameIdx: number;
  kind: string;
  amplitude: number;
  seed: number;
  lpipsQ: number;
}

export function renderSidecarCsv(rows: SidecarRow[], meta: Record<string, string>): string {
  const lines: string[] = [];
  const pairs = Object.entries(meta)
    .map(([k, v]) => `${k}=${v}`)
    .join(';');
  lines.push(`# meta: ${pairs}`);
  lines.push(CSV_HEADER);
  for (const row of rows) {
    lines.push(
      [
        row.clipId,
        String(row.frameIdx),
        row.kind,
        formatReal(row.amplitude),
        String(row.seed),
        formatReal(row.lpipsQ),
        // psnr_q / ssim_q are not this tool's responsibility; emit the
        // identity-neutral placeholders the importer accepts and the merge
        // step ignores
        '0',
        '0',
        'external',
      ].join(','),
    );
  }
  return lines.join('\n') + '\n';
}
