/** Backend bootstrap.
 *
 * Training must run on the pure-JS cpu backend: the wasm backend ships no
 * conv2d gradient kernels. Inference-only work (export) can use wasm, which
 * is an order of magnitude faster.
 */

import * as path from "path";
import * as tf from "@tensorflow/tfjs";

let ready: Promise<string> | null = null;

export function initBackend(prefer: "cpu" | "wasm" = "cpu"): Promise<string> {
  if (!ready) {
    ready = (async () => {
      if (prefer === "wasm") {
        try {
          const wasm = await import("@tensorflow/tfjs-backend-wasm");
          wasm.setWasmPaths(
            path.join(
              path.dirname(require.resolve("@tensorflow/tfjs-backend-wasm")),
              "/",
            ),
          );
          wasm.setThreadsCount(1);
          await tf.setBackend("wasm");
          await tf.ready();
          return tf.getBackend();
        } catch {
          // fall through to cpu
        }
      }
      await tf.setBackend("cpu");
      await tf.ready();
      return tf.getBackend();
    })();
  }
  return ready;
}
