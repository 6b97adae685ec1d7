/** Dataset loading, tokenization, deterministic splits, and run-manifest filtering. */

import { readFileSync } from 'fs';

export const UNKNOWN_LABEL = '__unknown__';

export interface Utterance {
  text: string;
  label: string;
}

export interface RawDataset {
  name: string;
  examples: Utterance[];
}

export type Split = 'train' | 'val' | 'test';

export interface SplitExample extends Utterance {
  id: string;
  split: Split;
}

export interface RunManifest {
  run_id: string;
  known_classes: string[];
}

/** Mulberry32: tiny deterministic PRNG so splits are reproducible across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function loadDataset(path: string): RawDataset {
  const raw = JSON.parse(readFileSync(path, 'utf-8')) as RawDataset;
  if (!Array.isArray(raw.examples) || raw.examples.length === 0) {
    throw new Error(`dataset ${path} has no examples`);
  }
  for (const ex of raw.examples) {
    if (!ex.text || !ex.label) throw new Error(`dataset ${path}: example missing text/label`);
    if (ex.label === UNKNOWN_LABEL) {
      throw new Error(`dataset ${path}: ${UNKNOWN_LABEL} is reserved`);
    }
  }
  return raw;
}

export function classNames(data: RawDataset): string[] {
  return [...new Set(data.examples.map((e) => e.label))].sort();
}

/**
 * Per-class shuffled split so every class appears in every split.
 * Fractions are train/val with the remainder as test.
 */
export function splitDataset(
  data: RawDataset,
  seed: number,
  valFraction = 0.15,
  testFraction = 0.15,
): SplitExample[] {
  const rand = mulberry32(seed);
  const byClass = new Map<string, Utterance[]>();
  for (const ex of data.examples) {
    const bucket = byClass.get(ex.label) ?? [];
    bucket.push(ex);
    byClass.set(ex.label, bucket);
  }
  const out: SplitExample[] = [];
  let counter = 0;
  for (const label of [...byClass.keys()].sort()) {
    const bucket = [...byClass.get(label)!];
    for (let i = bucket.length - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      [bucket[i], bucket[j]] = [bucket[j], bucket[i]];
    }
    const nVal = Math.max(1, Math.round(bucket.length * valFraction));
    const nTest = Math.max(1, Math.round(bucket.length * testFraction));
    bucket.forEach((ex, i) => {
      const split: Split = i < nVal ? 'val' : i < nVal + nTest ? 'test' : 'train';
      out.push({ ...ex, split, id: `${split}-${String(counter++).padStart(5, '0')}` });
    });
  }
  return out;
}

/**
 * Apply a run manifest: drop non-selected classes from train/val, relabel
 * their test examples as unknown. Test examples are never dropped.
 */
export function applyRunManifest(
  examples: SplitExample[],
  manifest: RunManifest,
  allClasses: string[],
): SplitExample[] {
  const known = new Set(manifest.known_classes);
  for (const name of known) {
    if (!allClasses.includes(name)) {
      throw new Error(`run manifest class ${name} not present in the dataset`);
    }
  }
  const out: SplitExample[] = [];
  for (const ex of examples) {
    if (known.has(ex.label)) {
      out.push(ex);
    } else if (ex.split === 'test') {
      out.push({ ...ex, label: UNKNOWN_LABEL });
    }
  }
  return out;
}

export interface Vocab {
  index: Map<string, number>;
  size: number;
  maxLen: number;
}

export function tokenize(text: string): string[] {
  return text.toLowerCase().split(/[^a-z0-9']+/).filter((t) => t.length > 0);
}

/** Vocabulary from the training split only; 0 = padding, 1 = out-of-vocabulary. */
export function buildVocab(examples: SplitExample[]): Vocab {
  const index = new Map<string, number>();
  let maxLen = 1;
  for (const ex of examples) {
    if (ex.split !== 'train') continue;
    const tokens = tokenize(ex.text);
    maxLen = Math.max(maxLen, tokens.length);
    for (const tok of tokens) {
      if (!index.has(tok)) index.set(tok, index.size + 2);
    }
  }
  return { index, size: index.size + 2, maxLen };
}

export function encode(text: string, vocab: Vocab): number[] {
  const ids = tokenize(text).map((t) => vocab.index.get(t) ?? 1);
  const clipped = ids.slice(0, vocab.maxLen);
  while (clipped.length < vocab.maxLen) clipped.push(0);
  return clipped;
}
