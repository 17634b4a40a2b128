/**
 * Beam search over the decoder, all live beams batched into one tensor.
 *
 * Completions far below the best one (relative log-probability prune)
 * are dropped, which keeps the emitted candidates meaningful when the
 * model is sharply peaked.
 */

import * as tf from "@tensorflow/tfjs";

import { Seq2SeqModel } from "./model";
import { EOS, PAD, SOS, decodeTarget } from "./vocab";

export interface BeamResult {
  text: string;
  logp: number;
}

interface Pending {
  tokens: number[];
  logp: number;
}

function lexLess(a: number[], b: number[]): boolean {
  const n = Math.min(a.length, b.length);
  for (let i = 0; i < n; i++) {
    if (a[i] !== b[i]) return a[i] < b[i];
  }
  return a.length < b.length;
}

export function beamDecode(
  model: Seq2SeqModel,
  srcIds: number[],
  width: number,
  maxLen: number,
  pruneLogp: number,
): BeamResult[] {
  const enc = tf.tidy(() => {
    const { memory, memProj, mask, h0, c0 } = model.encode([srcIds]);
    return { memory, memProj, mask, h0, c0 };
  });

  let beams: Pending[] = [{ tokens: [], logp: 0 }];
  let hs = enc.h0;
  let cs = enc.c0;
  const complete = new Map<string, number>();
  let bestComplete = -Infinity;

  for (let stepIndex = 0; stepIndex < maxLen; stepIndex++) {
    const nBeams = beams.length;
    const stepOut = tf.tidy(() => {
      const tiled = {
        memory: enc.memory.tile([nBeams, 1, 1]) as tf.Tensor3D,
        memProj: enc.memProj.tile([nBeams, 1, 1]) as tf.Tensor3D,
        mask: enc.mask.tile([nBeams, 1]) as tf.Tensor2D,
        h0: enc.h0,
        c0: enc.c0,
      };
      const tokIds = tf.tensor1d(
        beams.map((b) => (b.tokens.length ? b.tokens[b.tokens.length - 1] : SOS)),
        "int32",
      );
      const out = model.decodeStep(tokIds, hs, cs, tiled);
      const logp = tf.logSoftmax(out.logits);
      return { logp: logp.arraySync() as number[][], hs: out.hs, cs: out.cs };
    });
    if (stepIndex > 0) {
      hs.forEach((t) => t.dispose());
      cs.forEach((t) => t.dispose());
    }

    const expansions: { beam: number; tok: number; logp: number; tokens: number[] }[] = [];
    for (let i = 0; i < nBeams; i++) {
      const row = stepOut.logp[i];
      for (let tok = 0; tok < row.length; tok++) {
        if (tok === PAD || tok === SOS) continue;
        const lp = beams[i].logp + row[tok];
        if (tok === EOS) {
          if (beams[i].tokens.length === 0) continue;
          const text = decodeTarget(beams[i].tokens);
          const held = complete.get(text);
          if (held === undefined || held < lp) complete.set(text, lp);
          if (lp > bestComplete) bestComplete = lp;
        } else {
          expansions.push({ beam: i, tok, logp: lp, tokens: [...beams[i].tokens, tok] });
        }
      }
    }
    expansions.sort((a, b) => (a.logp !== b.logp ? b.logp - a.logp : lexLess(a.tokens, b.tokens) ? -1 : 1));
    const kept = expansions
      .slice(0, width)
      .filter((e) => e.logp > bestComplete + pruneLogp || complete.size < width);
    if (kept.length === 0) {
      stepOut.hs.forEach((t) => t.dispose());
      stepOut.cs.forEach((t) => t.dispose());
      break;
    }
    const idx = tf.tensor1d(kept.map((e) => e.beam), "int32");
    const nextHs = stepOut.hs.map((h) => tf.gather(h, idx) as tf.Tensor2D);
    const nextCs = stepOut.cs.map((c) => tf.gather(c, idx) as tf.Tensor2D);
    idx.dispose();
    stepOut.hs.forEach((t) => t.dispose());
    stepOut.cs.forEach((t) => t.dispose());
    hs = nextHs;
    cs = nextCs;
    beams = kept.map((e) => ({ tokens: e.tokens, logp: e.logp }));

    if (complete.size >= width && beams[0].logp <= bestComplete + pruneLogp) break;
  }

  if (hs !== enc.h0) {
    hs.forEach((t) => t.dispose());
    cs.forEach((t) => t.dispose());
  }
  enc.memory.dispose();
  enc.memProj.dispose();
  enc.mask.dispose();
  enc.h0.forEach((t) => t.dispose());
  enc.c0.forEach((t) => t.dispose());

  const ranked = [...complete.entries()]
    .filter(([, lp]) => lp > bestComplete + pruneLogp)
    .sort((a, b) => (a[1] !== b[1] ? b[1] - a[1] : a[0] < b[0] ? -1 : 1))
    .slice(0, width);
  return ranked.map(([text, logp]) => ({ text, logp }));
}
