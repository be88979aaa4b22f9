/**
 * Flat tensor file format shared with the segmentation pipeline.
 *
 * bytes 0-6  ASCII "FTNSR1\0"
 * byte  7    dtype code: 1 = float32, 2 = uint8, 3 = uint32
 * byte  8    ndim (1..4)
 * then       ndim little-endian uint32 dims
 * then       row-major payload, channel-innermost, little-endian
 */

import * as fs from "fs";

const MAGIC = Buffer.from("FTNSR1\0", "ascii");

export type TensorData = Float32Array | Uint8Array | Uint32Array;

export interface FlatTensor {
  dims: number[];
  data: TensorData;
}

function dtypeCode(data: TensorData): number {
  if (data instanceof Float32Array) return 1;
  if (data instanceof Uint8Array) return 2;
  return 3;
}

export function writeTensor(path: string, tensor: FlatTensor): void {
  const { dims, data } = tensor;
  if (dims.length < 1 || dims.length > 4) {
    throw new Error(`ndim must be 1..4, got ${dims.length}`);
  }
  const n = dims.reduce((a, b) => a * b, 1);
  if (n !== data.length) {
    throw new Error(`dims ${dims} declare ${n} elements, data has ${data.length}`);
  }
  if (data instanceof Float32Array) {
    for (const v of data) {
      if (!Number.isFinite(v)) throw new Error("refusing to write non-finite payload");
    }
  }
  const header = Buffer.alloc(9 + 4 * dims.length);
  MAGIC.copy(header, 0);
  header.writeUInt8(dtypeCode(data), 7);
  header.writeUInt8(dims.length, 8);
  dims.forEach((d, i) => header.writeUInt32LE(d, 9 + 4 * i));
  // Buffer.from over the typed array's storage is little-endian on every
  // platform node supports
  const payload = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  fs.writeFileSync(path, Buffer.concat([header, payload]));
}

export function readTensor(path: string): FlatTensor {
  const raw = fs.readFileSync(path);
  if (raw.length < 9 || !raw.subarray(0, 7).equals(MAGIC)) {
    throw new Error(`${path}: bad magic header`);
  }
  const code = raw.readUInt8(7);
  const ndim = raw.readUInt8(8);
  if (ndim < 1 || ndim > 4) throw new Error(`${path}: ndim ${ndim} outside 1..4`);
  const off = 9 + 4 * ndim;
  if (raw.length < off) throw new Error(`${path}: truncated dimension header`);
  const dims: number[] = [];
  for (let i = 0; i < ndim; i++) dims.push(raw.readUInt32LE(9 + 4 * i));
  const n = dims.reduce((a, b) => a * b, 1);
  const itemsize = code === 2 ? 1 : 4;
  if (raw.length !== off + n * itemsize) {
    throw new Error(`${path}: payload size mismatch`);
  }
  const body = raw.subarray(off);
  const copy = Buffer.alloc(body.length);
  body.copy(copy);
  let data: TensorData;
  if (code === 1) data = new Float32Array(copy.buffer, 0, n);
  else if (code === 2) data = new Uint8Array(copy.buffer, 0, n);
  else if (code === 3) data = new Uint32Array(copy.buffer, 0, n);
  else throw new Error(`${path}: unknown dtype code ${code}`);
  return { dims, data };
}
