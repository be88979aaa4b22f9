/** Run the network on a scene and write flat tensor rasters the
 * segmentation pipeline reads directly. Likelihoods and boundaries are raw
 * per-channel sigmoids in [0, 1]; downstream normalization is the
 * pipeline's job. */

import * as path from "path";
import * as fs from "fs";
import * as tf from "@tensorflow/tfjs";

import { MultiTaskNet } from "./model";
import { readTensor, writeTensor } from "./tensor_io";

export interface ExportedRasters {
  likelihoods: Float32Array; // h*w*C
  boundaries: Float32Array; // h*w*B
  height: number;
  width: number;
}

export function predict(
  net: MultiTaskNet,
  image: Float32Array,
  elevation: Float32Array,
  h: number,
  w: number,
): ExportedRasters {
  return tf.tidy(() => {
    const img = tf.tensor4d(image, [1, h, w, 3]);
    const elev = tf.tensor4d(elevation, [1, h, w, 1]);
    const { seg, bnd } = net.forward(img, elev);
    const lik = tf.sigmoid(seg).dataSync() as Float32Array;
    const bprob = tf.sigmoid(bnd).dataSync() as Float32Array;
    return {
      likelihoods: Float32Array.from(lik),
      boundaries: Float32Array.from(bprob),
      height: h,
      width: w,
    };
  });
}

/** sceneDir must hold image.ftn and elevation.ftn (the scene layout the
 * pipeline's synth command writes). */
export function exportScene(net: MultiTaskNet, sceneDir: string, outDir: string): void {
  const image = readTensor(path.join(sceneDir, "image.ftn"));
  const elevation = readTensor(path.join(sceneDir, "elevation.ftn"));
  const [h, w, ch] = image.dims;
  if (ch !== 3) throw new Error(`expected a 3-channel image, got ${ch}`);
  const out = predict(
    net,
    image.data as Float32Array,
    elevation.data as Float32Array,
    h,
    w,
  );
  fs.mkdirSync(outDir, { recursive: true });
  writeTensor(path.join(outDir, "likelihoods.ftn"), {
    dims: [h, w, net.spec.classCount],
    data: out.likelihoods,
  });
  writeTensor(path.join(outDir, "boundaries.ftn"), {
    dims: [h, w, net.spec.boundaryCount],
    data: out.boundaries,
  });
}
