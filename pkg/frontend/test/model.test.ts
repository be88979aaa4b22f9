import * as tf from "@tensorflow/tfjs";
import { beforeAll, describe, expect, it } from "vitest";

import { initBackend } from "../src/backend";
import { MultiTaskNet, defaultSpec, hypercolumnWidth } from "../src/model";

beforeAll(async () => {
  await initBackend("wasm");
});

describe("multi-task hypercolumn network", () => {
  it("stacks bottlenecks plus image plus elevation", () => {
    const spec = defaultSpec(3);
    const net = new MultiTaskNet(spec);
    const img = tf.randomUniform([1, 16, 16, 3], 0, 1, "float32", 1);
    const elev = tf.randomNormal([1, 16, 16, 1], 0, 1, "float32", 2);
    const stack = net.buildHypercolumn(img as tf.Tensor4D, elev as tf.Tensor4D);
    expect(stack.shape).toEqual([1, 16, 16, hypercolumnWidth(spec)]);
    expect(hypercolumnWidth(spec)).toBe(3 * 20 + 3 + 1);
    net.dispose();
  });

  it("keeps the spatial size for any input multiple of 4", () => {
    const net = new MultiTaskNet(defaultSpec(2));
    for (const [h, w] of [[16, 24], [32, 32], [20, 36]]) {
      const img = tf.zeros([1, h, w, 3]) as tf.Tensor4D;
      const elev = tf.zeros([1, h, w, 1]) as tf.Tensor4D;
      const { seg, bnd } = net.forward(img, elev);
      expect(seg.shape).toEqual([1, h, w, 2]);
      expect(bnd.shape).toEqual([1, h, w, 2]);
    }
    net.dispose();
  });

  it("rejects sizes that do not divide by the downsampling factor", () => {
    const net = new MultiTaskNet(defaultSpec(2));
    const img = tf.zeros([1, 18, 18, 3]) as tf.Tensor4D;
    const elev = tf.zeros([1, 18, 18, 1]) as tf.Tensor4D;
    expect(() => net.forward(img, elev)).toThrow(/multiple/);
    net.dispose();
  });

  it("zeroing an auxiliary raster changes only its own channels", () => {
    const net = new MultiTaskNet(defaultSpec(2));
    const img = tf.randomUniform([1, 16, 16, 3], 0, 1, "float32", 5) as tf.Tensor4D;
    const elevA = tf.randomNormal([1, 16, 16, 1], 0, 1, "float32", 6) as tf.Tensor4D;
    const elevB = tf.zeros([1, 16, 16, 1]) as tf.Tensor4D;
    const a = net.buildHypercolumn(img, elevA);
    const b = net.buildHypercolumn(img, elevB);
    const da = a.dataSync();
    const db = b.dataSync();
    const channels = a.shape[3];
    // elevation occupies channel 3; everything else is untouched because
    // the trunk never sees it
    for (let i = 0; i < da.length; i++) {
      const ch = i % channels;
      if (ch === 3) continue;
      expect(db[i]).toBe(da[i]);
    }
    expect(a.dataSync()[3]).not.toBe(b.dataSync()[3]);
    net.dispose();
  });

  it("heads output the configured channel counts and share nothing", () => {
    const spec = { ...defaultSpec(5), boundaryCount: 5 };
    const net = new MultiTaskNet(spec);
    expect(net.variables("seg").length).toBe(6);
    expect(net.variables("bnd").length).toBe(6);
    const segNames = new Set(net.variables("seg").map((v) => v.name));
    for (const v of net.variables("bnd")) expect(segNames.has(v.name)).toBe(false);
    net.dispose();
  });
});
