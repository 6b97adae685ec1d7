/**
 * Export-adapter CLI.
 *
 * Usage:
 *   node dist/cli.js --dataset data/toy-intents.json --out-dir out/ [--seed 0]
 *                    [--epochs 60] [--run-manifest runs/run_000/manifest.json]
 *   node dist/cli.js --config job.json
 *
 * A config file carries the same keys: {"datasetPath", "outDir", "seed",
 * "epochs", "runManifestPath"}.
 */

import { readFileSync } from 'fs';

import { RunManifest } from './data.js';
import { ExportJob, runExport } from './export.js';

function parseArgs(argv: string[]): ExportJob {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith('--') || value === undefined) {
      throw new Error(`malformed arguments near ${key ?? '<end>'}`);
    }
    flags.set(key.slice(2), value);
  }

  let job: Partial<ExportJob> & { runManifestPath?: string } = {};
  const configPath = flags.get('config');
  if (configPath) {
    job = JSON.parse(readFileSync(configPath, 'utf-8'));
  }
  if (flags.has('dataset')) job.datasetPath = flags.get('dataset')!;
  if (flags.has('out-dir')) job.outDir = flags.get('out-dir')!;
  if (flags.has('seed')) job.seed = Number(flags.get('seed'));
  if (flags.has('epochs')) job.epochs = Number(flags.get('epochs'));
  if (flags.has('run-manifest')) job.runManifestPath = flags.get('run-manifest');

  if (!job.datasetPath || !job.outDir) {
    throw new Error('required: --dataset <path> --out-dir <dir> (or --config with both)');
  }
  job.seed = job.seed ?? 0;
  if (job.runManifestPath) {
    job.runManifest = JSON.parse(readFileSync(job.runManifestPath, 'utf-8')) as RunManifest;
  }
  return job as ExportJob;
}

async function main() {
  const job = parseArgs(process.argv.slice(2));
  const result = await runExport(job);
  // quality is a sanity log, never a gate
  console.log(
    `exported ${result.nRecords} records (N=${result.nClasses}, D=${result.featureDim}) ` +
      `-> ${result.recordsPath}`,
  );
  console.log(
    `sanity: train accuracy ${result.trainAccuracy.toFixed(3)}, ` +
      `val accuracy ${result.valAccuracy.toFixed(3)}`,
  );
}

main().catch((err) => {
  console.error(`error: ${err instanceof Error ? err.message : err}`);
  process.exit(1);
});
