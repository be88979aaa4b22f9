/**
 * CLI: `train --scenes <dir> --out <ckpt>` and
 * `export --ckpt <path> --scene <dir> --out <dir>`.
 *
 * Scene directories follow the pipeline's synth layout (image.ftn, gt.ftn,
 * elevation.ftn per scene). Outputs are flat tensor files plus a JSON
 * training log next to the checkpoint.
 */

import * as fs from "fs";
import * as path from "path";

import { initBackend } from "./backend";
import { exportScene } from "./export";
import { defaultSpec } from "./model";
import { Scene, boundaryGtOf } from "./scenes";
import { readTensor } from "./tensor_io";
import { defaultTrainOptions, loadCheckpoint, saveCheckpoint, train } from "./train";

function parseFlags(args: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < args.length; i += 2) {
    if (!args[i].startsWith("--") || i + 1 >= args.length) {
      throw new Error(`malformed flag near ${args[i]}`);
    }
    out.set(args[i].slice(2), args[i + 1]);
  }
  return out;
}

function need(flags: Map<string, string>, key: string): string {
  const v = flags.get(key);
  if (v === undefined) throw new Error(`missing required flag --${key}`);
  return v;
}

function loadSceneDir(dir: string, classCount: number): Scene {
  const image = readTensor(path.join(dir, "image.ftn"));
  const gt = readTensor(path.join(dir, "gt.ftn"));
  const elevation = readTensor(path.join(dir, "elevation.ftn"));
  const [h, w] = gt.dims;
  return {
    height: h,
    width: w,
    classCount,
    image: image.data as Float32Array,
    gt: gt.data as Uint8Array,
    elevation: elevation.data as Float32Array,
    boundaryGt: boundaryGtOf(gt.data as Uint8Array, h, w, classCount),
  };
}

async function main(): Promise<number> {
  const [cmd, ...rest] = process.argv.slice(2);
  const flags = parseFlags(rest);
  await initBackend("wasm");

  if (cmd === "train") {
    const sceneRoot = need(flags, "scenes");
    const outPath = need(flags, "out");
    const classes = Number(flags.get("classes") ?? 4);
    const epochs = Number(flags.get("epochs") ?? defaultTrainOptions.epochs);
    const seed = Number(flags.get("seed") ?? 0);
    const dirs = fs
      .readdirSync(sceneRoot)
      .map((d) => path.join(sceneRoot, d))
      .filter((d) => fs.statSync(d).isDirectory())
      .sort();
    if (dirs.length === 0) throw new Error("no scene directories found");
    const scenes = dirs.map((d) => loadSceneDir(d, classes));
    const result = train(scenes, defaultSpec(classes), { epochs, seed });
    saveCheckpoint(result, outPath);
    fs.writeFileSync(outPath + ".log.json", JSON.stringify(result.log, null, 2));
    const first = result.log[0].loss;
    const last = result.log[result.log.length - 1].loss;
    console.log(
      `trained ${result.log.length} epochs on ${scenes.length} scenes: ` +
        `loss ${first.toFixed(4)} -> ${last.toFixed(4)}`,
    );
    return 0;
  }

  if (cmd === "export") {
    const { net } = loadCheckpoint(need(flags, "ckpt"));
    const outDir = need(flags, "out");
    exportScene(net, need(flags, "scene"), outDir);
    console.log(`wrote likelihoods.ftn and boundaries.ftn to ${outDir}`);
    return 0;
  }
  throw new Error(`usage: cli.js {train|export} --flags (got ${cmd ?? "nothing"})`);
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(2);
  });
