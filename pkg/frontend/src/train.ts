/** Training loop, checkpoint serialization, and training-log JSON. */

import * as fs from "fs";
import * as tf from "@tensorflow/tfjs";

import { LossWeights, classWeightsFrom, multitaskLoss } from "./loss";
import { MtNetSpec, MultiTaskNet } from "./model";
import { Rng } from "./rng";
import { Scene } from "./scenes";

export interface TrainOptions {
  epochs: number;
  batchSize: number;
  learningRate: number;
  seed: number;
  betaSeg: number;
  betaBnd: number;
}

export const defaultTrainOptions: TrainOptions = {
  epochs: 30,
  batchSize: 8,
  learningRate: 3e-3,
  seed: 0,
  betaSeg: 1.0,
  betaBnd: 1.0,
};

export interface EpochLog {
  epoch: number;
  loss: number;
}

export interface TrainResult {
  net: MultiTaskNet;
  weights: LossWeights;
  log: EpochLog[];
}

function sceneTensors(batch: Scene[]) {
  const n = batch.length;
  const { height: h, width: w, classCount: c } = batch[0];
  const img = new Float32Array(n * h * w * 3);
  const elev = new Float32Array(n * h * w);
  const gt = new Int32Array(n * h * w);
  const bnd = new Float32Array(n * h * w * c);
  batch.forEach((s, i) => {
    img.set(s.image, i * h * w * 3);
    elev.set(s.elevation, i * h * w);
    gt.set(s.gt, i * h * w);
    bnd.set(s.boundaryGt, i * h * w * c);
  });
  return {
    image: tf.tensor4d(img, [n, h, w, 3]),
    elevation: tf.tensor4d(elev, [n, h, w, 1]),
    gt: tf.tensor3d(gt, [n, h, w], "int32") as tf.Tensor3D,
    bndGt: tf.tensor4d(bnd, [n, h, w, batch[0].classCount]),
  };
}

export function train(
  scenes: Scene[],
  spec: MtNetSpec,
  options: Partial<TrainOptions> = {},
): TrainResult {
  const opt = { ...defaultTrainOptions, ...options };
  const net = new MultiTaskNet({ ...spec, seed: opt.seed });
  const weights: LossWeights = {
    betaSeg: opt.betaSeg,
    betaBnd: opt.betaBnd,
    classWeights: classWeightsFrom(scenes.map((s) => s.gt), spec.classCount),
    boundaryPos: 0.99,
    boundaryNeg: 0.01,
  };
  const optimizer = tf.train.adam(opt.learningRate);
  const rng = new Rng(opt.seed + 991);
  const log: EpochLog[] = [];
  const vars = net.variables();

  for (let epoch = 0; epoch < opt.epochs; epoch++) {
    const order = rng.shuffle(scenes);
    let total = 0;
    let batches = 0;
    for (let i = 0; i < order.length; i += opt.batchSize) {
      const batch = order.slice(i, i + opt.batchSize);
      const t = sceneTensors(batch);
      const lossNum = tf.tidy(() => {
        const lossVal = optimizer.minimize(
          () => {
            const { seg, bnd } = net.forward(t.image, t.elevation);
            return multitaskLoss(seg, bnd, t.gt, t.bndGt, weights);
          },
          true,
          vars,
        ) as tf.Scalar;
        return lossVal.dataSync()[0];
      });
      total += lossNum;
      batches += 1;
      t.image.dispose();
      t.elevation.dispose();
      t.gt.dispose();
      t.bndGt.dispose();
    }
    log.push({ epoch, loss: total / batches });
  }
  optimizer.dispose();
  return { net, weights, log };
}

export interface Checkpoint {
  spec: MtNetSpec;
  log: EpochLog[];
  weights: { name: string; shape: number[]; b64: string }[];
}

export function saveCheckpoint(result: TrainResult, path: string): void {
  const entries = result.net.variables().map((v) => {
    const data = v.dataSync() as Float32Array;
    return {
      name: result.net.canonicalName(v),
      shape: v.shape.slice(),
      b64: Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString("base64"),
    };
  });
  const blob: Checkpoint = {
    spec: result.net.spec,
    log: result.log,
    weights: entries,
  };
  fs.writeFileSync(path, JSON.stringify(blob));
}

export function loadCheckpoint(path: string): { net: MultiTaskNet; log: EpochLog[] } {
  const blob = JSON.parse(fs.readFileSync(path, "utf-8")) as Checkpoint;
  const net = new MultiTaskNet(blob.spec);
  const byName = new Map(blob.weights.map((w) => [w.name, w]));
  for (const v of net.variables()) {
    const entry = byName.get(net.canonicalName(v));
    if (!entry) throw new Error(`checkpoint is missing variable ${net.canonicalName(v)}`);
    const buf = Buffer.from(entry.b64, "base64");
    const data = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
    v.assign(tf.tensor(Array.from(data), entry.shape));
  }
  return { net, log: blob.log };
}
