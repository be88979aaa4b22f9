/**
 * Toy multi-task hypercolumn network.
 *
 * A small randomly-initialized trunk of three convolution blocks with 2x
 * average-pool downsampling between them stands in for a truncated
 * pretrained network. Each block feeds a learned 3x3 bottleneck onto the
 * hypercolumn, the bottlenecks are bilinearly upsampled to the input size
 * and stacked together with the input image and the elevation channel. Two
 * independent heads (two 1x1 layers plus a score layer each) map the stack
 * to segmentation logits (C channels) and per-class boundary logits (B
 * channels). The heads share the hypercolumn and nothing else.
 *
 * Convolutions are written as shifted-slice im2col plus one matMul and the
 * resamplings as reshape/stack compositions: the wasm backend has gradient
 * kernels for those, but not for the native conv2d/pool/resize ops.
 */

import * as tf from "@tensorflow/tfjs";

export interface MtNetSpec {
  classCount: number;
  boundaryCount: number;
  trunkWidths: [number, number, number];
  bottleneckWidth: number; // hypercolumn contribution per block
  headWidth: number;
  seed: number;
}

export function defaultSpec(classCount: number): MtNetSpec {
  return {
    classCount,
    boundaryCount: classCount,
    trunkWidths: [8, 12, 16],
    bottleneckWidth: 20,
    headWidth: 16,
    seed: 0,
  };
}

export function hypercolumnWidth(spec: MtNetSpec): number {
  return 3 * spec.bottleneckWidth + 3 + 1; // bottlenecks + image + elevation
}

interface ConvVars {
  kernel: tf.Variable; // [taps * cin, cout]
  bias: tf.Variable; // [cout]
  taps: number; // 9 for 3x3, 1 for 1x1
}

/** 2x downsampling by average pooling, as a reshape + mean. */
function downsample2x(x: tf.Tensor4D): tf.Tensor4D {
  const [n, h, w, c] = x.shape;
  const grouped = tf.reshape(x, [n, h / 2, 2, w / 2, 2, c]);
  return tf.mean(grouped, [2, 4]) as tf.Tensor4D;
}

const _bilinear = new Map<number, tf.Tensor2D>();

/** Fixed [2h, h] half-pixel bilinear interpolation matrix (0.75 / 0.25
 * weights, edge-clamped). Kept as a constant so upsampling is one matMul,
 * the only kind of op the wasm backend runs fast in both directions. */
function bilinearMatrix(h: number): tf.Tensor2D {
  let m = _bilinear.get(h);
  if (!m) {
    const data = new Float32Array(2 * h * h);
    for (let i = 0; i < h; i++) {
      const even = 2 * i, odd = 2 * i + 1;
      data[even * h + i] += 0.75;
      data[even * h + Math.max(i - 1, 0)] += 0.25;
      data[odd * h + i] += 0.75;
      data[odd * h + Math.min(i + 1, h - 1)] += 0.25;
    }
    m = tf.keep(tf.tensor2d(data, [2 * h, h])) as tf.Tensor2D;
    _bilinear.set(h, m);
  }
  return m;
}

/** Bilinear 2x upsampling via the fixed interpolation matrix, applied
 * separably along height and width. */
export function upsample2x(x: tf.Tensor4D): tf.Tensor4D {
  const [n, h, w, c] = x.shape;
  const alongH = tf.reshape(
    tf.matMul(bilinearMatrix(h), tf.reshape(x, [n, h, w * c])),
    [n, 2 * h, w, c],
  ) as tf.Tensor4D;
  const swapped = tf.transpose(alongH, [0, 2, 1, 3]); // [n, w, 2h, c]
  const alongW = tf.reshape(
    tf.matMul(bilinearMatrix(w), tf.reshape(swapped, [n, w, 2 * h * c])),
    [n, 2 * w, 2 * h, c],
  );
  return tf.transpose(alongW, [0, 2, 1, 3]) as tf.Tensor4D;
}

let _instances = 0;

export class MultiTaskNet {
  readonly spec: MtNetSpec;
  readonly prefix: string; // tfjs variable names are global, so scope them
  trunk: ConvVars[] = [];
  bottlenecks: ConvVars[] = [];
  segHead: ConvVars[] = [];
  bndHead: ConvVars[] = [];

  constructor(spec: MtNetSpec) {
    this.spec = spec;
    this.prefix = `net${_instances++}/`;
    let seed = spec.seed * 1000 + 17;
    const conv = (taps: number, cin: number, cout: number, name: string): ConvVars => {
      const init = tf.initializers.glorotUniform({ seed: seed++ });
      const kernel = tf.variable(
        init.apply([taps * cin, cout]) as tf.Tensor, true,
        `${this.prefix}${name}/kernel`,
      );
      const bias = tf.variable(tf.zeros([cout]), true, `${this.prefix}${name}/bias`);
      return { kernel, bias, taps };
    };

    const [t1, t2, t3] = spec.trunkWidths;
    this.trunk = [
      conv(9, 3, t1, "trunk1"),
      conv(9, t1, t2, "trunk2"),
      conv(9, t2, t3, "trunk3"),
    ];
    this.bottlenecks = [
      conv(9, t1, spec.bottleneckWidth, "bottleneck1"),
      conv(9, t2, spec.bottleneckWidth, "bottleneck2"),
      conv(9, t3, spec.bottleneckWidth, "bottleneck3"),
    ];
    const hw = hypercolumnWidth(spec);
    this.segHead = [
      conv(1, hw, spec.headWidth, "seg1"),
      conv(1, spec.headWidth, spec.headWidth, "seg2"),
      conv(1, spec.headWidth, spec.classCount, "seg_score"),
    ];
    this.bndHead = [
      conv(1, hw, spec.headWidth, "bnd1"),
      conv(1, spec.headWidth, spec.headWidth, "bnd2"),
      conv(1, spec.headWidth, spec.boundaryCount, "bnd_score"),
    ];
  }

  private apply(x: tf.Tensor4D, v: ConvVars, relu = true): tf.Tensor4D {
    const [n, h, w, c] = x.shape;
    const cout = v.kernel.shape[1] as number;
    let out: tf.Tensor;
    if (v.taps === 1) {
      out = tf.matMul(tf.reshape(x, [n * h * w, c]), v.kernel as tf.Tensor2D);
    } else {
      // 3x3 conv as nine shifted-slice matmuls accumulated by addition;
      // slice/pad/matmul all have cheap wasm gradients
      const padded = tf.pad(x, [[0, 0], [1, 1], [1, 1], [0, 0]]);
      let acc: tf.Tensor | null = null;
      let tap = 0;
      for (let dr = 0; dr < 3; dr++) {
        for (let dc = 0; dc < 3; dc++) {
          const shift = tf.reshape(
            tf.slice(padded, [0, dr, dc, 0], [n, h, w, c]), [n * h * w, c],
          );
          const wk = tf.slice(v.kernel, [tap * c, 0], [c, cout]) as tf.Tensor2D;
          const part = tf.matMul(shift, wk);
          acc = acc === null ? part : tf.add(acc, part);
          tap += 1;
        }
      }
      out = acc!;
    }
    let y = tf.reshape(tf.add(out, v.bias), [n, h, w, cout]) as tf.Tensor4D;
    if (relu) y = tf.relu(y);
    return y;
  }

  /** The hypercolumn as its constituent parts: raw image, elevation, and
   * the three upsampled bottlenecks. The concatenation is kept implicit
   * during training (each head's first 1x1 layer sums per-part matmuls;
   * concat gradients are pathologically slow on wasm). */
  hypercolumnParts(image: tf.Tensor4D, elevation: tf.Tensor4D): tf.Tensor4D[] {
    const [, h, w] = image.shape;
    if (h % 4 !== 0 || w % 4 !== 0) {
      throw new Error("input size must be a multiple of the downsampling factor 4");
    }
    const b1 = this.apply(image, this.trunk[0]);
    const b2 = this.apply(downsample2x(b1), this.trunk[1]);
    const b3 = this.apply(downsample2x(b2), this.trunk[2]);

    const h1 = this.apply(b1, this.bottlenecks[0]);
    const h2 = upsample2x(this.apply(b2, this.bottlenecks[1]));
    const h3 = upsample2x(upsample2x(this.apply(b3, this.bottlenecks[2])));
    return [image, elevation, h1, h2, h3];
  }

  /** Materialized hypercolumn stack (inspection and tests). */
  buildHypercolumn(image: tf.Tensor4D, elevation: tf.Tensor4D): tf.Tensor4D {
    return tf.concat(this.hypercolumnParts(image, elevation), 3) as tf.Tensor4D;
  }

  private head(parts: tf.Tensor4D[], vars: ConvVars[]): tf.Tensor4D {
    // first 1x1 layer as a sum over parts of matMul with the matching
    // kernel rows: identical to conv1x1(concat(parts)) without the concat
    const [n, h, w] = parts[0].shape;
    const width = vars[0].kernel.shape[1] as number;
    let acc: tf.Tensor | null = null;
    let offset = 0;
    for (const part of parts) {
      const c = part.shape[3];
      const rows = tf.slice(vars[0].kernel, [offset, 0], [c, width]) as tf.Tensor2D;
      const term = tf.matMul(tf.reshape(part, [n * h * w, c]), rows);
      acc = acc === null ? term : tf.add(acc, term);
      offset += c;
    }
    const a = tf.relu(
      tf.reshape(tf.add(acc!, vars[0].bias), [n, h, w, width]),
    ) as tf.Tensor4D;
    const b = this.apply(a, vars[1]);
    return this.apply(b, vars[2], false); // score layer stays linear
  }

  /** Returns segmentation and boundary logits at input resolution. */
  forward(image: tf.Tensor4D, elevation: tf.Tensor4D): {
    seg: tf.Tensor4D;
    bnd: tf.Tensor4D;
  } {
    const parts = this.hypercolumnParts(image, elevation);
    return { seg: this.head(parts, this.segHead), bnd: this.head(parts, this.bndHead) };
  }

  variables(group?: "trunk" | "bottlenecks" | "seg" | "bnd"): tf.Variable[] {
    const pick = (cs: ConvVars[]) => cs.flatMap((c) => [c.kernel, c.bias]);
    switch (group) {
      case "trunk":
        return pick(this.trunk);
      case "bottlenecks":
        return pick(this.bottlenecks);
      case "seg":
        return pick(this.segHead);
      case "bnd":
        return pick(this.bndHead);
      default:
        return [
          ...pick(this.trunk), ...pick(this.bottlenecks),
          ...pick(this.segHead), ...pick(this.bndHead),
        ];
    }
  }

  /** Instance-independent variable name, stable across processes. */
  canonicalName(v: tf.Variable): string {
    return v.name.startsWith(this.prefix) ? v.name.slice(this.prefix.length) : v.name;
  }

  dispose(): void {
    for (const v of this.variables()) v.dispose();
  }
}
