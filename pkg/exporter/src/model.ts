/**
 * Small recurrent intent classifier: embedding -> bidirectional LSTM ->
 * linear class logits. The concatenated last forward / last backward LSTM
 * outputs form the sentence representation; the pre-softmax dense outputs are
 * the logits. Both are exported per example.
 */

import * as tf from '@tensorflow/tfjs';

import { SplitExample, Vocab, encode } from './data.js';

export interface TrainOptions {
  seed: number;
  epochs: number;
  embeddingDim: number;
  lstmUnits: number;
  learningRate: number;
}

export const DEFAULT_TRAIN: TrainOptions = {
  seed: 0,
  epochs: 60,
  embeddingDim: 16,
  lstmUnits: 16,
  learningRate: 0.02,
};

export interface TrainedClassifier {
  /** maps encoded token ids to [features, logits] */
  extractor: tf.LayersModel;
  classifier: tf.LayersModel;
  featureDim: number;
  classes: string[];
  vocab: Vocab;
  trainAccuracy: number;
  valAccuracy: number;
}

function buildModel(vocab: Vocab, nClasses: number, opts: TrainOptions) {
  const input = tf.input({ shape: [vocab.maxLen], dtype: 'int32' });
  const embedded = tf.layers
    .embedding({
      inputDim: vocab.size,
      outputDim: opts.embeddingDim,
      embeddingsInitializer: tf.initializers.glorotUniform({ seed: opts.seed }),
    })
    .apply(input) as tf.SymbolicTensor;
  const features = tf.layers
    .bidirectional({
      layer: tf.layers.lstm({
        units: opts.lstmUnits,
        kernelInitializer: tf.initializers.glorotUniform({ seed: opts.seed + 1 }),
        recurrentInitializer: tf.initializers.orthogonal({ seed: opts.seed + 2 }),
      }) as tf.layers.RNN,
      mergeMode: 'concat',
    })
    .apply(embedded) as tf.SymbolicTensor;
  const logits = tf.layers
    .dense({
      units: nClasses,
      kernelInitializer: tf.initializers.glorotUniform({ seed: opts.seed + 3 }),
      name: 'class_logits',
    })
    .apply(features) as tf.SymbolicTensor;
  const probs = tf.layers.softmax({}).apply(logits) as tf.SymbolicTensor;

  const classifier = tf.model({ inputs: input, outputs: probs });
  const extractor = tf.model({ inputs: input, outputs: [features, logits] });
  return { classifier, extractor };
}

function accuracy(model: tf.LayersModel, xs: tf.Tensor, labels: number[]): number {
  return tf.tidy(() => {
    const pred = (model.predict(xs) as tf.Tensor).argMax(-1).arraySync() as number[];
    const hits = pred.filter((p, i) => p === labels[i]).length;
    return labels.length ? hits / labels.length : 0;
  });
}

export async function trainClassifier(
  examples: SplitExample[],
  classes: string[],
  vocab: Vocab,
  opts: TrainOptions = DEFAULT_TRAIN,
): Promise<TrainedClassifier> {
  const classIndex = new Map(classes.map((c, i) => [c, i]));
  const encodeSplit = (split: string) => {
    const rows = examples.filter((e) => e.split === split);
    const xs = tf.tensor2d(rows.map((e) => encode(e.text, vocab)), undefined, 'int32');
    const labels = rows.map((e) => classIndex.get(e.label)!);
    return { xs, labels };
  };
  const train = encodeSplit('train');
  const val = encodeSplit('val');
  if (train.labels.length === 0 || val.labels.length === 0) {
    throw new Error('training needs non-empty train and val splits');
  }

  const { classifier, extractor } = buildModel(vocab, classes.length, opts);
  classifier.compile({
    optimizer: tf.train.adam(opts.learningRate),
    loss: 'sparseCategoricalCrossentropy',
  });
  // tfjs' sparse loss wants float labels (its floor() rejects int32)
  const ys = tf.tensor1d(train.labels, 'float32');
  await classifier.fit(train.xs, ys, {
    epochs: opts.epochs,
    batchSize: 32,
    shuffle: true,
    verbose: 0,
  });
  ys.dispose();

  const trainAcc = accuracy(classifier, train.xs, train.labels);
  const valAcc = accuracy(classifier, val.xs, val.labels);
  train.xs.dispose();
  val.xs.dispose();

  return {
    classifier,
    extractor,
    featureDim: 2 * opts.lstmUnits,
    classes,
    vocab,
    trainAccuracy: trainAcc,
    valAccuracy: valAcc,
  };
}

export interface ExampleOutputs {
  features: number[];
  logits: number[];
}

export function extractOutputs(model: TrainedClassifier, texts: string[]): ExampleOutputs[] {
  if (texts.length === 0) return [];
  return tf.tidy(() => {
    const xs = tf.tensor2d(texts.map((t) => encode(t, model.vocab)), undefined, 'int32');
    const [features, logits] = model.extractor.predict(xs) as tf.Tensor[];
    const f = features.arraySync() as number[][];
    const z = logits.arraySync() as number[][];
    return texts.map((_, i) => ({ features: f[i], logits: z[i] }));
  });
}
