/** Backend selection: wasm when its kernels are available, else plain cpu. */

import * as path from "path";

import * as tf from "@tensorflow/tfjs";

export async function initBackend(prefer: string = "wasm"): Promise<string> {
  if (prefer === "wasm") {
    try {
      const wasm = require("@tensorflow/tfjs-backend-wasm");
      const wasmBinary = require.resolve(
        "@tensorflow/tfjs-backend-wasm/dist/tfjs-backend-wasm.wasm",
      );
      wasm.setWasmPaths(path.dirname(wasmBinary) + path.sep);
      if (await tf.setBackend("wasm")) {
        await tf.ready();
        return "wasm";
      }
    } catch {
      // fall through to cpu
    }
  }
  await tf.setBackend("cpu");
  await tf.ready();
  return "cpu";
}
