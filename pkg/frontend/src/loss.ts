/**
 * Multi-task loss: L = betaSeg * L_seg + betaBnd * sum_b L_b.
 *
 * Segmentation: per-pixel cross-entropy on sigmoid-normalized posteriors
 * p(c) = sigma(z_c) / sum_c' sigma(z_c'), weighted per class by omega_c
 * (inverse frequency truncated at 10). Boundaries: one independent binary
 * cross-entropy per class channel, weighting errors on boundary pixels by
 * 0.99 and on non-boundary pixels by 0.01. IGNORE pixels contribute nothing.
 */

import * as tf from "@tensorflow/tfjs";

import { IGNORE } from "./scenes";

/** log sigma(z) = -softplus(-z); tf.logSigmoid's gradient is broken in
 * tfjs 4.x (uses a disposed intermediate), softplus differentiates fine. */
function logSigmoid(z: tf.Tensor): tf.Tensor {
  return tf.neg(tf.softplus(tf.neg(z)));
}

export interface LossWeights {
  betaSeg: number;
  betaBnd: number;
  classWeights: number[]; // omega_c, length C
  boundaryPos: number;
  boundaryNeg: number;
}

export function defaultWeights(classCount: number): LossWeights {
  return {
    betaSeg: 1.0,
    betaBnd: 1.0,
    classWeights: new Array(classCount).fill(1.0),
    boundaryPos: 0.99,
    boundaryNeg: 0.01,
  };
}

/** Inverse-frequency class weights, truncated at 10, normalized so a
 * uniform distribution gives 1 for every class. */
export function classWeightsFrom(
  gts: Uint8Array[],
  classCount: number,
): number[] {
  const counts = new Array(classCount).fill(0);
  let total = 0;
  for (const gt of gts) {
    for (const v of gt) {
      if (v === IGNORE) continue;
      counts[v] += 1;
      total += 1;
    }
  }
  return counts.map((c) => {
    if (c === 0) return 10.0;
    const inv = total / (c * classCount);
    return Math.min(10.0, inv);
  });
}

/**
 * segLogits: [n, h, w, C]; bndLogits: [n, h, w, B];
 * gt: int32 [n, h, w] with IGNORE=255; bndGt: [n, h, w, B] in {0, 1}.
 */
export function multitaskLoss(
  segLogits: tf.Tensor4D,
  bndLogits: tf.Tensor4D,
  gt: tf.Tensor3D,
  bndGt: tf.Tensor4D,
  weights: LossWeights,
): tf.Scalar {
  // no tf.tidy here: the gradient tape needs the intermediates alive;
  // training steps wrap the whole closure instead
  const classCount = segLogits.shape[3];
  const valid = tf.notEqual(gt, IGNORE);
  const validF = tf.cast(valid, "float32");
  const nValid = tf.maximum(tf.sum(validF), 1);
  const safeGt = tf.where(valid, gt, tf.zerosLike(gt));
  const oneHot = tf.oneHot(tf.cast(safeGt, "int32"), classCount);

  // log p(c) = log sigma(z_c) - logsumexp_c' log sigma(z_c')
  const logSig = logSigmoid(segLogits);
  const norm = tf.logSumExp(logSig, 3, true);
  const logPost = tf.sub(logSig, norm);
  const omega = tf.tensor1d(weights.classWeights);
  const perPixelW = tf.sum(tf.mul(oneHot, omega), 3);
  const nllTrue = tf.neg(tf.sum(tf.mul(oneHot, logPost), 3));
  const segLoss = tf.div(
    tf.sum(tf.mul(tf.mul(nllTrue, perPixelW), validF)), nValid,
  );

  // weighted binary cross-entropy per boundary channel, summed over tasks
  const y = tf.cast(bndGt, "float32");
  const posTerm = tf.mul(y, logSigmoid(bndLogits));
  const negTerm = tf.mul(tf.sub(1, y), logSigmoid(tf.neg(bndLogits)));
  const wMap = tf.add(
    tf.mul(y, weights.boundaryPos), tf.mul(tf.sub(1, y), weights.boundaryNeg),
  );
  const bce = tf.neg(tf.mul(wMap, tf.add(posTerm, negTerm)));
  const masked = tf.mul(bce, tf.expandDims(validF, 3));
  const bndLoss = tf.div(tf.sum(masked), nValid); // sums the B channels

  return tf.add(
    tf.mul(tf.scalar(weights.betaSeg), segLoss),
    tf.mul(tf.scalar(weights.betaBnd), bndLoss),
  ) as tf.Scalar;
}
