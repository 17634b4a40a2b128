/**
 * Encoder-decoder LSTM with scaled multiplicative attention, written on
 * the tensor core API so training, checkpointing and stepwise beam
 * decoding stay fully under our control on CPU-class backends.
 *
 * Encoder: per-layer bidirectional LSTM over the source embedding;
 * memory is the top layer's per-step forward||backward vectors.
 * Decoder: stacked LSTM; at each step the top state scores the memory
 * (h . W m / sqrt(H)), the softmaxed context is combined through a tanh
 * projection, and a linear head emits target-token logits.
 *
 * Sources are right-padded; attention masks padded positions out, and
 * the forward direction's true final state is picked per row with a
 * time selector.  Recurrent states are not frozen across pad steps (the
 * pad embedding is learned), which keeps the step loop lean enough for
 * the pure CPU/wasm backends.
 */

import * as tf from "@tensorflow/tfjs";

import { Batch } from "./data";
import { sourceVocab, targetVocab, PAD } from "./vocab";

export interface AdapterConfig {
  hiddenUnits: number;
  embeddingDim: number;
  layers: number;
  attention: "scaled";
  steps: number;
  batchSize: number;
  beamWidth: number;
  maxSrcLen: number;
  maxTgtLen: number;
  dataFraction: number;
  continuous: boolean;
  optimizer: "sgd" | "adam";
  learningRate: number;
  clipNorm: number;
  seed: number;
  pruneLogp: number;
}

export const DEFAULT_CONFIG: AdapterConfig = {
  hiddenUnits: 512,
  embeddingDim: 64,
  layers: 2,
  attention: "scaled",
  steps: 12000,
  batchSize: 512,
  beamWidth: 240,
  maxSrcLen: 80,
  maxTgtLen: 140,
  dataFraction: 1.0,
  continuous: false,
  optimizer: "sgd",
  learningRate: 1.0,
  clipNorm: 5.0,
  seed: 0,
  pruneLogp: -5.0,
};

export class DivergenceError extends Error {}

interface LstmWeights {
  w: tf.Variable; // [(in + H), 4H] fused gate kernel
  b: tf.Variable; // [4H]
}

function lstmStep(
  weights: LstmWeights,
  x: tf.Tensor2D,
  h: tf.Tensor2D,
  c: tf.Tensor2D,
): [tf.Tensor2D, tf.Tensor2D] {
  const z = tf.add(tf.matMul(tf.concat([x, h], 1), weights.w as tf.Tensor2D), weights.b);
  const [i, f, g, o] = tf.split(z, 4, 1);
  const nc = tf.add(tf.mul(tf.sigmoid(f), c), tf.mul(tf.sigmoid(i), tf.tanh(g)));
  const nh = tf.mul(tf.sigmoid(o), tf.tanh(nc));
  return [nh as tf.Tensor2D, nc as tf.Tensor2D];
}

export interface Encoded {
  memory: tf.Tensor3D; // [B,Ts,2H]
  memProj: tf.Tensor3D; // [B,Ts,H]
  mask: tf.Tensor2D; // [B,Ts] 1.0 at real positions
  h0: tf.Tensor2D[]; // per decoder layer
  c0: tf.Tensor2D[];
}

let instanceCounter = 0;

export class Seq2SeqModel {
  readonly cfg: AdapterConfig;
  step = 0;
  private vars = new Map<string, tf.Variable>();
  private seedCounter = 0;
  // tfjs registers variable names globally, so each instance gets a prefix
  private readonly scope = `m${instanceCounter++}`;

  constructor(cfg: AdapterConfig) {
    this.cfg = cfg;
    const { hiddenUnits: H, embeddingDim: E, layers: L } = cfg;
    this.addVar("src_emb", [sourceVocab.size, E]);
    this.addVar("tgt_emb", [targetVocab.size, E]);
    for (let l = 0; l < L; l++) {
      const encIn = l === 0 ? E : 2 * H;
      for (const dir of ["fw", "bw"]) {
        this.addVar(`enc${l}_${dir}_w`, [encIn + H, 4 * H]);
        this.addVar(`enc${l}_${dir}_b`, [4 * H], true);
      }
      this.addVar(`bridge${l}_w`, [2 * H, H]);
      this.addVar(`bridge${l}_b`, [H], true);
      const decIn = l === 0 ? E : H;
      this.addVar(`dec${l}_w`, [decIn + H, 4 * H]);
      this.addVar(`dec${l}_b`, [4 * H], true);
    }
    this.addVar("attn_w", [2 * H, H]);
    this.addVar("combine_w", [3 * H, H]);
    this.addVar("combine_b", [H], true);
    this.addVar("out_w", [H, targetVocab.size]);
    this.addVar("out_b", [targetVocab.size], true);
  }

  private addVar(name: string, shape: number[], zeros = false) {
    const init = zeros
      ? tf.zeros(shape)
      : tf.randomNormal(shape, 0, 0.08, "float32", this.cfg.seed * 1000 + this.seedCounter++);
    this.vars.set(name, tf.variable(init, true, `${this.scope}/${name}`));
  }

  v(name: string): tf.Variable {
    const got = this.vars.get(name);
    if (!got) throw new Error(`no variable ${name}`);
    return got;
  }

  variables(): tf.Variable[] {
    return [...this.vars.values()];
  }

  private embed(table: tf.Variable, ids: tf.Tensor): tf.Tensor {
    // one-hot matmul instead of gather: the gather gradient kernel is
    // missing on the wasm backend, and these tables are tiny anyway
    const flat = ids.flatten().cast("int32");
    const hot = tf.oneHot(flat, table.shape[0] as number).cast("float32");
    return tf.matMul(hot, table as tf.Tensor2D).reshape([...ids.shape, -1]);
  }

  /** Encoder pass over a right-padded id matrix. */
  encode(srcIds: number[][]): Encoded {
    const { hiddenUnits: H, layers: L } = this.cfg;
    const B = srcIds.length;
    const Ts = srcIds[0].length;
    const src = tf.tensor2d(srcIds, [B, Ts], "int32");
    const mask = tf.notEqual(src, PAD).cast("float32") as tf.Tensor2D; // [B,Ts]
    // one-hot row selector of each row's last real position
    const lastIdx = srcIds.map((row) => {
      let n = row.length - 1;
      while (n > 0 && row[n] === PAD) n--;
      return n;
    });
    const lastSel = tf.oneHot(tf.tensor1d(lastIdx, "int32"), Ts).cast("float32"); // [B,Ts]

    const emb = this.embed(this.v("src_emb"), src) as tf.Tensor3D;
    let steps: tf.Tensor2D[] = [];
    for (let t = 0; t < Ts; t++) {
      steps.push(emb.slice([0, t, 0], [B, 1, -1]).reshape([B, -1]) as tf.Tensor2D);
    }

    const h0: tf.Tensor2D[] = [];
    for (let l = 0; l < L; l++) {
      const fwW = { w: this.v(`enc${l}_fw_w`), b: this.v(`enc${l}_fw_b`) };
      const bwW = { w: this.v(`enc${l}_bw_w`), b: this.v(`enc${l}_bw_b`) };
      const fwOut: tf.Tensor2D[] = [];
      const bwOut: tf.Tensor2D[] = new Array(Ts);
      let h = tf.zeros([B, H]) as tf.Tensor2D;
      let c = tf.zeros([B, H]) as tf.Tensor2D;
      for (let t = 0; t < Ts; t++) {
        [h, c] = lstmStep(fwW, steps[t], h, c);
        fwOut.push(h);
      }
      // true forward-final state per row, regardless of padding
      const fwStack = tf.stack(fwOut, 1) as tf.Tensor3D; // [B,Ts,H]
      const fwLast = tf.sum(tf.mul(fwStack, lastSel.expandDims(2)), 1) as tf.Tensor2D;
      h = tf.zeros([B, H]) as tf.Tensor2D;
      c = tf.zeros([B, H]) as tf.Tensor2D;
      for (let t = Ts - 1; t >= 0; t--) {
        [h, c] = lstmStep(bwW, steps[t], h, c);
        bwOut[t] = h;
      }
      const bwLast = h;
      steps = [];
      for (let t = 0; t < Ts; t++) {
        steps.push(tf.concat([fwOut[t], bwOut[t]], 1) as tf.Tensor2D);
      }
      h0.push(
        tf.tanh(
          tf.add(
            tf.matMul(tf.concat([fwLast, bwLast], 1), this.v(`bridge${l}_w`) as tf.Tensor2D),
            this.v(`bridge${l}_b`),
          ),
        ) as tf.Tensor2D,
      );
    }
    const memory = tf.stack(steps, 1) as tf.Tensor3D; // [B,Ts,2H]
    const memProj = tf.matMul(
      memory.reshape([B * Ts, 2 * H]),
      this.v("attn_w") as tf.Tensor2D,
    ).reshape([B, Ts, H]) as tf.Tensor3D;
    const c0 = h0.map(() => tf.zeros([B, H]) as tf.Tensor2D);
    return { memory, memProj, mask, h0, c0 };
  }

  /** One decoder step from embedded input; returns the attended vector. */
  private decodeCore(
    x0: tf.Tensor2D,
    hs: tf.Tensor2D[],
    cs: tf.Tensor2D[],
    enc: Encoded,
  ): { attnVec: tf.Tensor2D; hs: tf.Tensor2D[]; cs: tf.Tensor2D[] } {
    const { hiddenUnits: H, layers: L } = this.cfg;
    let x = x0;
    const nh: tf.Tensor2D[] = [];
    const nc: tf.Tensor2D[] = [];
    for (let l = 0; l < L; l++) {
      const weights = { w: this.v(`dec${l}_w`), b: this.v(`dec${l}_b`) };
      const [h, c] = lstmStep(weights, x, hs[l], cs[l]);
      nh.push(h);
      nc.push(c);
      x = h;
    }
    const hTop = x; // [B,H]
    const scores = tf.div(
      tf.matMul(enc.memProj, hTop.expandDims(2)).squeeze([2]),
      Math.sqrt(H),
    ); // [B,Ts]
    const masked = tf.add(scores, tf.mul(tf.sub(enc.mask, 1), 1e9));
    const alpha = tf.softmax(masked); // [B,Ts]
    const context = tf.matMul(alpha.expandDims(1), enc.memory).squeeze([1]) as tf.Tensor2D;
    const attnVec = tf.tanh(
      tf.add(
        tf.matMul(tf.concat([context, hTop], 1), this.v("combine_w") as tf.Tensor2D),
        this.v("combine_b"),
      ),
    ) as tf.Tensor2D;
    return { attnVec, hs: nh, cs: nc };
  }

  /** One decoder step from token ids; returns logits [B,V] and new states. */
  decodeStep(tokIds: tf.Tensor1D, hs: tf.Tensor2D[], cs: tf.Tensor2D[], enc: Encoded) {
    const x = this.embed(this.v("tgt_emb"), tokIds) as tf.Tensor2D;
    const out = this.decodeCore(x, hs, cs, enc);
    const logits = tf.add(
      tf.matMul(out.attnVec, this.v("out_w") as tf.Tensor2D),
      this.v("out_b"),
    ) as tf.Tensor2D;
    return { logits, hs: out.hs, cs: out.cs };
  }

  /** Teacher-forced mean cross-entropy over the non-pad target positions. */
  loss(batch: Batch): tf.Scalar {
    return tf.tidy(() => {
      const enc = this.encode(batch.src);
      const B = batch.decIn.length;
      const Tt = batch.decIn[0].length;
      const decIn = tf.tensor2d(batch.decIn, [B, Tt], "int32");
      const embAll = this.embed(this.v("tgt_emb"), decIn) as tf.Tensor3D; // [B,Tt,E]
      let hs = enc.h0;
      let cs = enc.c0;
      const attnVecs: tf.Tensor2D[] = [];
      for (let t = 0; t < Tt; t++) {
        const x = embAll.slice([0, t, 0], [B, 1, -1]).reshape([B, -1]) as tf.Tensor2D;
        const out = this.decodeCore(x, hs, cs, enc);
        hs = out.hs;
        cs = out.cs;
        attnVecs.push(out.attnVec);
      }
      // one batched head over all positions
      const flat = tf.concat(attnVecs, 0); // [Tt*B, H] (time-major blocks)
      const logits = tf.add(tf.matMul(flat, this.v("out_w") as tf.Tensor2D), this.v("out_b"));
      const logp = tf.logSoftmax(logits);
      // labels in matching time-major order
      const labels: number[] = [];
      for (let t = 0; t < Tt; t++) {
        for (let b = 0; b < B; b++) labels.push(batch.decOut[b][t]);
      }
      const labelT = tf.tensor1d(labels, "int32");
      const picked = tf.mul(tf.oneHot(labelT, targetVocab.size), logp).sum(1).neg();
      const live = tf.notEqual(labelT, PAD).cast("float32");
      const total = tf.sum(tf.mul(picked, live));
      const count = tf.sum(live);
      return tf.div(total, count) as tf.Scalar;
    });
  }

  trainStep(batch: Batch, optimizer: tf.Optimizer): number {
    const { value, grads } = tf.variableGrads(() => this.loss(batch), this.variables());
    const lossVal = value.dataSync()[0];
    value.dispose();
    if (!Number.isFinite(lossVal)) {
      Object.values(grads).forEach((g) => g.dispose());
      throw new DivergenceError(`loss is ${lossVal} at step ${this.step}`);
    }
    const names = Object.keys(grads);
    const norm = tf.tidy(
      () => tf.sqrt(tf.addN(names.map((n) => tf.sum(tf.square(grads[n]))))).dataSync()[0],
    );
    if (!Number.isFinite(norm)) {
      Object.values(grads).forEach((g) => g.dispose());
      throw new DivergenceError(`gradient norm is ${norm} at step ${this.step}`);
    }
    tf.tidy(() => {
      const scale = norm > this.cfg.clipNorm ? this.cfg.clipNorm / norm : 1.0;
      const clipped: tf.NamedTensorMap = {};
      for (const n of names) clipped[n] = tf.mul(grads[n], scale);
      optimizer.applyGradients(clipped);
    });
    Object.values(grads).forEach((g) => g.dispose());
    this.step += 1;
    return lossVal;
  }

  makeOptimizer(): tf.Optimizer {
    return this.cfg.optimizer === "adam"
      ? tf.train.adam(this.cfg.learningRate)
      : tf.train.sgd(this.cfg.learningRate);
  }

  /** Weight export: name -> base64 of the float32 buffer, plus shapes. */
  serialize(): string {
    const weights: Record<string, { shape: number[]; data: string }> = {};
    for (const [name, variable] of this.vars) {
      const data = variable.dataSync() as Float32Array;
      weights[name] = {
        shape: variable.shape.slice(),
        data: Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString("base64"),
      };
    }
    return JSON.stringify({ config: this.cfg, step: this.step, weights });
  }

  static deserialize(text: string): Seq2SeqModel {
    const payload = JSON.parse(text);
    const model = new Seq2SeqModel(payload.config as AdapterConfig);
    model.step = payload.step;
    for (const [name, entry] of Object.entries<any>(payload.weights)) {
      const buf = Buffer.from(entry.data, "base64");
      const arr = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
      model.v(name).assign(tf.tensor(Array.from(arr), entry.shape) as tf.Tensor);
    }
    return model;
  }

  dispose() {
    for (const variable of this.vars.values()) variable.dispose();
    this.vars.clear();
  }
}
