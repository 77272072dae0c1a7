#!/usr/bin/env node
import { oracleRun, writeSidecarCsv } from './oracle.js';

const USAGE =
  'usage: lpips-oracle <pristine_dir> <degraded_dir> <kind> <amplitude> <seed> <out_csv>';

export function main(argv: string[]): number {
  if (argv.length !== 6) {
    console.error(USAGE);
    return 2;
  }
  const [pristineDir, degradedDir, kind, amplitudeArg, seedArg, outCsv] = argv;
  const amplitude = Number(amplitudeArg);
  const seed = Number(seedArg);
  if (!Number.isFinite(amplitude)) {
    console.error(`error: amplitude is not a number: ${amplitudeArg}`);
    return 2;
  }
  if (!Number.isInteger(seed)) {
    console.error(`error: seed is not an integer: ${seedArg}`);
    return 2;
  }
  try {
    const rows = oracleRun({ pristineDir, degradedDir, kind, amplitude, seed });
    writeSidecarCsv(rows, outCsv);
    console.log(`wrote ${rows.length} rows to ${outCsv}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
