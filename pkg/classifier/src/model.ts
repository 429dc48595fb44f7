/**
 * Toy convolutional classifier: two conv blocks and a softmax head over
 * 32x32 grayscale inputs. Training is deterministic under a fixed seed
 * (seeded initializers, fixed shuffle, full-precision CPU backend).
 */

import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import { SIDE, Sample, makeRng } from './dataset';

export interface TrainedModel {
  model: tf.LayersModel;
  classes: number;
}

export interface TrainOutcome extends TrainedModel {
  holdoutAccuracy: number;
}

export class ModelFileError extends Error {}

export function buildModel(classes: number, seed: number): tf.LayersModel {
  const init = (offset: number) => tf.initializers.glorotUniform({ seed: seed + offset });
  const model = tf.sequential();
  // an average-pool front end keeps the pure-JS convolutions desk-scale fast
  model.add(tf.layers.averagePooling2d({ inputShape: [SIDE, SIDE, 1], poolSize: 2 }));
  model.add(
    tf.layers.conv2d({
      filters: 8,
      kernelSize: 3,
      activation: 'relu',
      kernelInitializer: init(1),
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      activation: 'relu',
      kernelInitializer: init(2),
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({ units: classes, activation: 'softmax', kernelInitializer: init(3) }),
  );
  model.compile({
    optimizer: tf.train.adam(0.005),
    loss: 'sparseCategoricalCrossentropy',
    metrics: ['accuracy'],
  });
  return model;
}

function toTensors(samples: Sample[]): { xs: tf.Tensor4D; ys: tf.Tensor1D } {
  const xs = tf.tensor4d(
    samples.flatMap((s) => Array.from(s.values)),
    [samples.length, SIDE, SIDE, 1],
  );
  // sparseCategoricalCrossentropy in tfjs wants float labels
  const ys = tf.tensor1d(samples.map((s) => s.label), 'float32');
  return { xs, ys };
}

/** Deterministic shuffle + 75/25 split, stratification left to the shuffle. */
export function holdoutSplit(samples: Sample[], seed: number): { train: Sample[]; held: Sample[] } {
  const rng = makeRng(seed ^ 0x5eed);
  const order = samples
    .map((s, i) => ({ s, key: rng(), i }))
    .sort((a, b) => a.key - b.key || a.i - b.i)
    .map((e) => e.s);
  const cut = Math.max(1, Math.floor(order.length * 0.25));
  return { held: order.slice(0, cut), train: order.slice(cut) };
}

export async function trainToy(
  samples: Sample[],
  classes: number,
  epochs: number,
  seed: number,
): Promise<TrainOutcome> {
  if (samples.length < 8) {
    throw new Error(`too few samples to train: ${samples.length}`);
  }
  const { train, held } = holdoutSplit(samples, seed);
  const model = buildModel(classes, seed);
  const { xs, ys } = toTensors(train);
  // light seeded noise augmentation: one jittered copy per training sample
  const noisy = tf.tidy(() =>
    tf.clipByValue(xs.add(tf.randomNormal(xs.shape, 0, 0.05, 'float32', seed + 7)), 0, 1),
  );
  const allXs = tf.concat([xs, noisy]);
  const allYs = tf.concat([ys, ys]);
  await model.fit(allXs, allYs, { epochs, batchSize: 16, shuffle: false, verbose: 0 });
  tf.dispose([xs, ys, noisy, allXs, allYs]);

  const heldTensors = toTensors(held);
  const preds = tf.tidy(
    () => (model.predict(heldTensors.xs) as tf.Tensor2D).argMax(-1) as tf.Tensor1D,
  );
  const predArr = Array.from(await preds.data());
  tf.dispose([heldTensors.xs, heldTensors.ys, preds]);
  const correct = predArr.filter((p, i) => p === held[i].label).length;
  return { model, classes, holdoutAccuracy: correct / held.length };
}

export async function saveModel(trained: TrainedModel, filePath: string): Promise<void> {
  let captured: tf.io.ModelArtifacts | null = null;
  await trained.model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      captured = artifacts;
      return { modelArtifactsInfo: { dateSaved: new Date(0), modelTopologyType: 'JSON' } };
    }),
  );
  if (!captured) throw new ModelFileError('model serialization produced no artifacts');
  const artifacts = captured as tf.io.ModelArtifacts;
  const doc = {
    format: 'toy-classifier-v1',
    classes: trained.classes,
    modelTopology: artifacts.modelTopology,
    weightSpecs: artifacts.weightSpecs,
    weightDataB64: Buffer.from(artifacts.weightData as ArrayBuffer).toString('base64'),
  };
  fs.writeFileSync(filePath, JSON.stringify(doc));
}

export async function loadModel(filePath: string): Promise<TrainedModel> {
  if (!fs.existsSync(filePath)) {
    throw new ModelFileError(`model file missing: ${filePath}`);
  }
  let doc: any;
  try {
    doc = JSON.parse(fs.readFileSync(filePath, 'utf-8'));
  } catch (err) {
    throw new ModelFileError(`model file is not valid JSON: ${filePath}`);
  }
  if (doc.format !== 'toy-classifier-v1' || !doc.modelTopology || !doc.weightDataB64) {
    throw new ModelFileError(`model file is corrupt or wrong format: ${filePath}`);
  }
  const weightData = new Uint8Array(Buffer.from(doc.weightDataB64, 'base64')).buffer;
  const model = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: doc.modelTopology,
      weightSpecs: doc.weightSpecs,
      weightData,
    }),
  );
  return { model, classes: doc.classes };
}

/** Verdict for one 32x32 luma plane; resizes other shapes bilinearly. */
export function classifyValues(
  trained: TrainedModel,
  values: Float32Array,
  width: number,
  height: number,
): { label: number; scores: number[] } {
  return tf.tidy(() => {
    let input = tf.tensor4d(Array.from(values), [1, height, width, 1]);
    if (width !== SIDE || height !== SIDE) {
      input = tf.image.resizeBilinear(input as tf.Tensor4D, [SIDE, SIDE]);
    }
    const scores = trained.model.predict(input) as tf.Tensor2D;
    const arr = Array.from(scores.dataSync());
    const total = arr.reduce((a, b) => a + b, 0) || 1;
    const normalized = arr.map((v) => v / total);
    let best = 0;
    for (let i = 1; i < normalized.length; i++) {
      if (normalized[i] > normalized[best]) best = i;
    }
    return { label: best, scores: normalized };
  });
}
