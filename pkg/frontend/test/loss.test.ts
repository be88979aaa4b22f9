import * as tf from "@tensorflow/tfjs";
import { beforeAll, describe, expect, it } from "vitest";

import { initBackend } from "../src/backend";
import { LossWeights, classWeightsFrom, defaultWeights, multitaskLoss } from "../src/loss";
import { MultiTaskNet, defaultSpec } from "../src/model";
import { IGNORE } from "../src/scenes";

beforeAll(async () => {
  await initBackend("wasm");
});

/** Double-precision from-scratch reimplementation of the loss, used both as
 * a value oracle and to take accurate central differences. */
function referenceLoss(
  seg: Float64Array, // h*w*C logits
  bnd: Float64Array, // h*w*B logits
  gt: Uint8Array,
  bndGt: Uint8Array,
  h: number,
  w: number,
  c: number,
  weights: LossWeights,
): number {
  const sigma = (z: number) => 1 / (1 + Math.exp(-z));
  let nValid = 0;
  let segLoss = 0;
  let bndLoss = 0;
  for (let p = 0; p < h * w; p++) {
    if (gt[p] === IGNORE) continue;
    nValid += 1;
    let denom = 0;
    for (let k = 0; k < c; k++) denom += sigma(seg[p * c + k]);
    const post = sigma(seg[p * c + gt[p]]) / denom;
    segLoss += -weights.classWeights[gt[p]] * Math.log(post);
    for (let k = 0; k < c; k++) {
      const y = bndGt[p * c + k];
      const s = sigma(bnd[p * c + k]);
      const wgt = y ? weights.boundaryPos : weights.boundaryNeg;
      bndLoss += -wgt * (y * Math.log(s) + (1 - y) * Math.log(1 - s));
    }
  }
  nValid = Math.max(nValid, 1);
  return (
    weights.betaSeg * (segLoss / nValid) + weights.betaBnd * (bndLoss / nValid)
  );
}

function lossOf(
  seg: number[], bnd: number[], gt: number[], bndGt: number[],
  h: number, w: number, c: number, weights: LossWeights,
): number {
  const s = tf.tensor4d(seg, [1, h, w, c]);
  const b = tf.tensor4d(bnd, [1, h, w, c]);
  const g = tf.tensor3d(gt, [1, h, w], "int32") as tf.Tensor3D;
  const bg = tf.tensor4d(bndGt, [1, h, w, c]);
  const val = multitaskLoss(s, b, g, bg, weights).dataSync()[0];
  return val;
}

describe("multitask loss", () => {
  it("uniform logits on a single pixel cost omega * log 2", () => {
    const weights = { ...defaultWeights(2), betaBnd: 0, classWeights: [1.7, 1.0] };
    const val = lossOf([0, 0], [0, 0], [0], [0, 0], 1, 1, 2, weights);
    expect(val).toBeCloseTo(1.7 * Math.log(2), 5);
  });

  it("confident correct predictions cost under 1e-3 at logit 20", () => {
    const weights = defaultWeights(2);
    const val = lossOf(
      [20, -20], [20, -20], [0], [1, 0], 1, 1, 2, weights,
    );
    expect(val).toBeLessThan(1e-3);
  });

  it("matches the double-precision reference on random inputs", () => {
    const h = 4, w = 4, c = 3;
    const weights = { ...defaultWeights(c), classWeights: [2.0, 0.5, 1.0] };
    const seg: number[] = [], bnd: number[] = [], gt: number[] = [], bg: number[] = [];
    for (let p = 0; p < h * w; p++) {
      gt.push(p % c);
      for (let k = 0; k < c; k++) {
        seg.push(Math.sin(p * c + k));
        bnd.push(Math.cos(p * c + k) * 2);
        bg.push((p + k) % 3 === 0 ? 1 : 0);
      }
    }
    const val = lossOf(seg, bnd, gt, bg, h, w, c, weights);
    const ref = referenceLoss(
      Float64Array.from(seg), Float64Array.from(bnd),
      Uint8Array.from(gt), Uint8Array.from(bg), h, w, c, weights,
    );
    expect(Math.abs(val - ref)).toBeLessThan(1e-5);
  });

  it("masks IGNORE pixels", () => {
    const weights = defaultWeights(2);
    const full = lossOf([5, -5, 0, 0], [5, -5, 0, 0], [0, 0], [1, 0, 0, 1], 1, 2, 2, weights);
    // masking the noisy second pixel must equal evaluating the first alone
    const masked = lossOf([5, -5, 0, 0], [5, -5, 0, 0], [0, IGNORE], [1, 0, 0, 1], 1, 2, 2, weights);
    const alone = lossOf([5, -5], [5, -5], [0], [1, 0], 1, 1, 2, weights);
    expect(masked).toBeCloseTo(alone, 6);
    expect(masked).not.toBeCloseTo(full, 3);
  });

  it("computes truncated inverse-frequency class weights", () => {
    const gt = new Uint8Array(100);
    gt.fill(0, 0, 98);
    gt[98] = 1;
    gt[99] = 1;
    const w = classWeightsFrom([gt], 2);
    expect(w[0]).toBeCloseTo(100 / (98 * 2), 6);
    expect(w[1]).toBe(10.0); // 100 / (2*2) = 25, truncated
  });

  it("analytic gradients match float64 central differences to 1e-4", () => {
    const h = 4, w = 4, c = 2;
    const weights = { ...defaultWeights(c), classWeights: [1.3, 0.8] };
    const seg: number[] = [], bnd: number[] = [], gt: number[] = [], bg: number[] = [];
    for (let p = 0; p < h * w; p++) {
      gt.push((p * 7) % c);
      for (let k = 0; k < c; k++) {
        seg.push(Math.sin(3 * p + k));
        bnd.push(Math.cos(2 * p - k));
        bg.push((p * 3 + k) % 4 === 0 ? 1 : 0);
      }
    }
    const gTen = tf.tensor3d(gt, [1, h, w], "int32") as tf.Tensor3D;
    const bgTen = tf.tensor4d(bg, [1, h, w, c]);
    const grads = tf.grads((s, b) =>
      multitaskLoss(s as tf.Tensor4D, b as tf.Tensor4D, gTen, bgTen, weights),
    )([tf.tensor4d(seg, [1, h, w, c]), tf.tensor4d(bnd, [1, h, w, c])]);
    const analytic = [grads[0].dataSync(), grads[1].dataSync()];

    const eps = 1e-5; // float64 reference makes tiny steps safe
    const refAt = (sv: number[], bv: number[]) =>
      referenceLoss(
        Float64Array.from(sv), Float64Array.from(bv),
        Uint8Array.from(gt), Uint8Array.from(bg), h, w, c, weights,
      );
    for (const which of [0, 1]) {
      const base = which === 0 ? seg : bnd;
      let num2 = 0, diff2 = 0;
      for (let i = 0; i < base.length; i++) {
        const plus = base.slice();
        const minus = base.slice();
        plus[i] += eps;
        minus[i] -= eps;
        const numeric =
          which === 0
            ? (refAt(plus, bnd) - refAt(minus, bnd)) / (2 * eps)
            : (refAt(seg, plus) - refAt(seg, minus)) / (2 * eps);
        num2 += numeric * numeric;
        const d = numeric - analytic[which][i];
        diff2 += d * d;
      }
      expect(Math.sqrt(diff2) / Math.sqrt(num2)).toBeLessThan(1e-4);
    }
  });

  it("beta_bnd = 0 zeroes boundary-head gradients exactly", () => {
    const spec = defaultSpec(3);
    const net = new MultiTaskNet(spec);
    const img = tf.randomUniform([1, 16, 16, 3], 0, 1, "float32", 9) as tf.Tensor4D;
    const elev = tf.randomNormal([1, 16, 16, 1], 0, 1, "float32", 10) as tf.Tensor4D;
    const gt = tf.zeros([1, 16, 16], "int32") as tf.Tensor3D;
    const bndGt = tf.zeros([1, 16, 16, 3]) as tf.Tensor4D;
    const weights = { ...defaultWeights(3), betaBnd: 0 };
    const { grads } = tf.variableGrads(() => {
      const f = net.forward(img, elev);
      return multitaskLoss(f.seg, f.bnd, gt, bndGt, weights);
    }, net.variables());

    let bndMax = 0;
    for (const v of net.variables("bnd")) {
      const g = grads[v.name].dataSync();
      for (const x of g) bndMax = Math.max(bndMax, Math.abs(x));
    }
    expect(bndMax).toBe(0); // exact isolation, not approximate

    let trunkMax = 0;
    for (const v of net.variables("trunk")) {
      const g = grads[v.name].dataSync();
      for (const x of g) trunkMax = Math.max(trunkMax, Math.abs(x));
    }
    expect(trunkMax).toBeGreaterThan(0); // seg task still reaches the trunk
    net.dispose();
  });
});
