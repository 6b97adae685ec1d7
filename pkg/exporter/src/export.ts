/** Writes the interchange files: manifest.json + records.csv. */

import { mkdirSync, writeFileSync } from 'fs';
import { join } from 'path';

import {
  RunManifest,
  SplitExample,
  UNKNOWN_LABEL,
  applyRunManifest,
  buildVocab,
  classNames,
  loadDataset,
  splitDataset,
} from './data.js';
import { DEFAULT_TRAIN, TrainOptions, extractOutputs, trainClassifier } from './model.js';

export interface ExportJob {
  datasetPath: string;
  outDir: string;
  seed: number;
  epochs?: number;
  runManifest?: RunManifest;
}

export interface ExportResult {
  nClasses: number;
  featureDim: number;
  nRecords: number;
  trainAccuracy: number;
  valAccuracy: number;
  manifestPath: string;
  recordsPath: string;
}

/** Shortest round-trip decimal: JS number-to-string already guarantees it. */
function formatReal(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite value in export: ${v}`);
  return String(v);
}

function csvHeader(nClasses: number, featureDim: number): string {
  const cols = ['id', 'split', 'gold_label'];
  for (let i = 0; i < nClasses; i++) cols.push(`logit_${i}`);
  for (let i = 0; i < featureDim; i++) cols.push(`feat_${i}`);
  return cols.join(',');
}

export async function runExport(job: ExportJob): Promise<ExportResult> {
  const data = loadDataset(job.datasetPath);
  const allClasses = classNames(data);
  let examples = splitDataset(data, job.seed);
  let classes = allClasses;
  if (job.runManifest) {
    examples = applyRunManifest(examples, job.runManifest, allClasses);
    classes = allClasses.filter((c) => job.runManifest!.known_classes.includes(c));
  }

  const trainExamples = examples.filter((e) => e.split !== 'test');
  const vocab = buildVocab(trainExamples);
  const opts: TrainOptions = {
    ...DEFAULT_TRAIN,
    seed: job.seed,
    epochs: job.epochs ?? DEFAULT_TRAIN.epochs,
  };
  const model = await trainClassifier(trainExamples, classes, vocab, opts);

  const outputs = extractOutputs(model, examples.map((e) => e.text));
  const lines = [csvHeader(classes.length, model.featureDim)];
  for (let i = 0; i < examples.length; i++) {
    const ex = examples[i];
    const { logits, features } = outputs[i];
    lines.push(
      [
        ex.id,
        ex.split,
        ex.label,
        ...logits.map(formatReal),
        ...features.map(formatReal),
      ].join(','),
    );
  }

  mkdirSync(job.outDir, { recursive: true });
  const manifestPath = join(job.outDir, 'manifest.json');
  const recordsPath = join(job.outDir, 'records.csv');
  const manifest = {
    n_classes: classes.length,
    feature_dim: model.featureDim,
    class_names: classes,
    unknown_label: UNKNOWN_LABEL,
  };
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n', 'utf-8');
  writeFileSync(recordsPath, lines.join('\n') + '\n', 'utf-8');

  return {
    nClasses: classes.length,
    featureDim: model.featureDim,
    nRecords: examples.length,
    trainAccuracy: model.trainAccuracy,
    valAccuracy: model.valAccuracy,
    manifestPath,
    recordsPath,
  };
}
