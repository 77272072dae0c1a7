import * as fs from 'node:fs';
import * as path from 'node:path';
import { decodeImage, listFrameFiles } from './image.js';
import { BACKBONE_NAME, PerceptualBackbone, lpipsQuality } from './backbone.js';
import { renderSidecarCsv, type SidecarRow } from './csv.js';

export const TOOL_VERSION = '0.1.0';

export interface OracleJob {
  pristineDir: string;
  degradedDir: string;
  kind: string;
  amplitude: number;
  seed: number;
}

const KINDS = new Set([
  'gaussian_blur',
  'jpeg_compression',
  'brightness',
  'gaussian_noise',
  'saturation',
  'color_jitter',
]);

export function validateJob(job: OracleJob): void {
  if (!KINDS.has(job.kind)) {
    throw new Error(`unknown degradation kind: ${job.kind}`);
  }
  if (!(job.amplitude >= 0 && job.amplitude <= 1)) {
    throw new Error(`amplitude out of range [0, 1]: ${job.amplitude}`);
  }
  if (!Number.isInteger(job.seed) || job.seed < 0) {
    throw new Error(`seed must be a non-negative integer: ${job.seed}`);
  }
  for (const dir of [job.pristineDir, job.degradedDir]) {
    if (!fs.existsSync(dir) || !fs.statSync(dir).isDirectory()) {
      throw new Error(`not a directory: ${dir}`);
    }
  }
}

/** Both directories must contain exactly the same frame filenames. */
export function checkMirroredLayout(pristineDir: string, degradedDir: string): string[] {
  const pristine = listFrameFiles(pristineDir);
  const degraded = new Set(listFrameFiles(degradedDir));
  const onlyPristine = pristine.filter((f) => !degraded.has(f));
  const pristineSet = new Set(pristine);
  const onlyDegraded = [...degraded].filter((f) => !pristineSet.has(f));
  if (onlyPristine.length > 0 || onlyDegraded.length > 0) {
    const parts: string[] = [];
    if (onlyPristine.length > 0) parts.push(`only in pristine: ${onlyPristine.join(', ')}`);
    if (onlyDegraded.length > 0) parts.push(`only in degraded: ${onlyDegraded.join(', ')}`);
    throw new Error(`frame filename sets differ; ${parts.join('; ')}`);
  }
  if (pristine.length === 0) {
    throw new Error(`no decodable frame files in ${pristineDir}`);
  }
  return pristine;
}

export function oracleRun(job: OracleJob, backbone?: PerceptualBackbone): SidecarRow[] {
  validateJob(job);
  const frames = checkMirroredLayout(job.pristineDir, job.degradedDir);
  const net = backbone ?? new PerceptualBackbone();
  const clipId = path.basename(path.resolve(job.degradedDir));
  const rows: SidecarRow[] = [];
  frames.forEach((name, frameIdx) => {
    const pristine = decodeImage(path.join(job.pristineDir, name));
    const degraded = decodeImage(path.join(job.degradedDir, name));
    const d = net.distance(pristine, degraded);
    rows.push({
      clipId,
      frameIdx,
      kind: job.kind,
      amplitude: job.amplitude,
      seed: job.seed,
      lpipsQ: lpipsQuality(d),
    });
  });
  return rows;
}

export function writeSidecarCsv(rows: SidecarRow[], outCsv: string): void {
  const csv = renderSidecarCsv(rows, {
    backbone: BACKBONE_NAME,
    tool_version: TOOL_VERSION,
  });
  fs.writeFileSync(outCsv, csv, 'utf-8');
}
