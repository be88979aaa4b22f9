/**
 * Synthetic training scenes: colored axis-aligned rectangles and small blobs
 * on a background, with elevation offsets and per-class 1-px-thick boundary
 * ground truth (a pixel of class c is boundary iff a 4-neighbor differs).
 */

import { Rng } from "./rng";

export const IGNORE = 255;

export interface Scene {
  height: number;
  width: number;
  classCount: number;
  image: Float32Array; // h*w*3
  gt: Uint8Array; // h*w
  elevation: Float32Array; // h*w
  boundaryGt: Uint8Array; // h*w*C, binary
}

const BASE_COLORS = [
  [0.85, 0.85, 0.85],
  [0.25, 0.35, 0.75],
  [0.2, 0.7, 0.3],
  [0.8, 0.25, 0.25],
  [0.75, 0.7, 0.2],
  [0.3, 0.7, 0.75],
];

export function boundaryGtOf(gt: Uint8Array, h: number, w: number, c: number): Uint8Array {
  const out = new Uint8Array(h * w * c);
  for (let r = 0; r < h; r++) {
    for (let q = 0; q < w; q++) {
      const lab = gt[r * w + q];
      if (lab === IGNORE) continue;
      let edge = false;
      if (r > 0 && gt[(r - 1) * w + q] !== lab && gt[(r - 1) * w + q] !== IGNORE) edge = true;
      if (r < h - 1 && gt[(r + 1) * w + q] !== lab && gt[(r + 1) * w + q] !== IGNORE) edge = true;
      if (q > 0 && gt[r * w + q - 1] !== lab && gt[r * w + q - 1] !== IGNORE) edge = true;
      if (q < w - 1 && gt[r * w + q + 1] !== lab && gt[r * w + q + 1] !== IGNORE) edge = true;
      if (edge) out[(r * w + q) * c + lab] = 1;
    }
  }
  return out;
}

export function generateScene(
  h: number,
  w: number,
  classCount: number,
  seed: number,
  colorNoise = 0.06,
): Scene {
  const rng = new Rng(seed);
  const gt = new Uint8Array(h * w);
  const elevation = new Float32Array(h * w);

  const paint = (top: number, left: number, rh: number, rw: number, cls: number, elev: number) => {
    for (let r = top; r < top + rh; r++) {
      for (let q = left; q < left + rw; q++) {
        gt[r * w + q] = cls;
        elevation[r * w + q] = elev;
      }
    }
  };

  const nRects = Math.max(3, Math.floor((h * w) / 1200));
  for (let i = 0; i < nRects; i++) {
    const rh = rng.int(Math.floor(h / 6), Math.floor(h / 3) + 1);
    const rw = rng.int(Math.floor(w / 6), Math.floor(w / 3) + 1);
    const top = rng.int(0, h - rh);
    const left = rng.int(0, w - rw);
    const cls = rng.int(1, classCount);
    const elev = cls === 1 ? rng.uniform(2, 6) : rng.uniform(0, 1);
    paint(top, left, rh, rw, cls, elev);
  }
  for (let i = 0; i < Math.max(2, Math.floor(nRects / 2)); i++) {
    const rh = rng.int(3, 6);
    const rw = rng.int(4, 8);
    paint(rng.int(0, h - rh), rng.int(0, w - rw), rh, rw, classCount - 1, 0.8);
  }

  const image = new Float32Array(h * w * 3);
  for (let p = 0; p < h * w; p++) {
    const color = BASE_COLORS[gt[p] % BASE_COLORS.length];
    for (let ch = 0; ch < 3; ch++) {
      const v = color[ch] + colorNoise * rng.normal();
      image[p * 3 + ch] = Math.min(1, Math.max(0, v));
    }
    elevation[p] += 0.05 * rng.normal();
  }

  return {
    height: h,
    width: w,
    classCount,
    image,
    gt,
    elevation,
    boundaryGt: boundaryGtOf(gt, h, w, classCount),
  };
}
