/** Reading and batching of the exchange files produced by the core. */

import * as fs from "fs";

import { EOS, PAD, SOS, encodeSource, encodeTarget } from "./vocab";

export interface Pair {
  src: number[];
  tgt: number[]; // without SOS/EOS; those are added at batching time
}

export function readLines(path: string): string[] {
  return fs
    .readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.length > 0);
}

export function readPairs(
  srcPath: string,
  tgtPath: string,
  maxSrcLen: number,
  maxTgtLen: number,
): Pair[] {
  const srcLines = readLines(srcPath);
  const tgtLines = readLines(tgtPath);
  if (srcLines.length !== tgtLines.length) {
    throw new Error(
      `unaligned pair files: ${srcLines.length} source vs ${tgtLines.length} target lines`,
    );
  }
  return srcLines.map((line, i) => ({
    src: encodeSource(line, maxSrcLen),
    tgt: encodeTarget(tgtLines[i], maxTgtLen),
  }));
}

/** Lines "ANUM<TAB>tokens" for inference; malformed lines are counted. */
export function readInferenceSources(
  path: string,
  maxSrcLen: number,
): { entries: { anum: string; src: number[] }[]; skipped: number } {
  const entries: { anum: string; src: number[] }[] = [];
  let skipped = 0;
  for (const line of readLines(path)) {
    const parts = line.split("\t");
    if (parts.length !== 2 || !/^A\d+$/.test(parts[0])) {
      skipped += 1;
      continue;
    }
    try {
      entries.push({ anum: parts[0], src: encodeSource(parts[1], maxSrcLen) });
    } catch {
      skipped += 1;
    }
  }
  return { entries, skipped };
}

/** Deterministic PRNG so data-fraction subsets are reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function selectFraction<T>(items: T[], fraction: number, seed: number): T[] {
  if (fraction >= 1.0) return items.slice();
  const rng = mulberry32(seed);
  const k = Math.max(1, Math.floor(items.length * fraction));
  const order = items.map((_, i) => i);
  for (let i = order.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  return order.slice(0, k).sort((a, b) => a - b).map((i) => items[i]);
}

export interface Batch {
  src: number[][]; // [B][Ts], PAD-filled
  srcLen: number[];
  decIn: number[][]; // [B][Tt+1], SOS-prefixed
  decOut: number[][]; // [B][Tt+1], EOS-suffixed
}

export function padBatch(pairs: Pair[]): Batch {
  const ts = Math.max(...pairs.map((p) => p.src.length), 1);
  const tt = Math.max(...pairs.map((p) => p.tgt.length), 1) + 1;
  const src: number[][] = [];
  const srcLen: number[] = [];
  const decIn: number[][] = [];
  const decOut: number[][] = [];
  for (const p of pairs) {
    src.push([...p.src, ...Array(ts - p.src.length).fill(PAD)]);
    srcLen.push(Math.max(1, p.src.length));
    const di = [SOS, ...p.tgt];
    const dout = [...p.tgt, EOS];
    decIn.push([...di, ...Array(tt - di.length).fill(PAD)]);
    decOut.push([...dout, ...Array(tt - dout.length).fill(PAD)]);
  }
  return { src, srcLen, decIn, decOut };
}

export function batches(pairs: Pair[], batchSize: number, seed: number): Batch[] {
  const rng = mulberry32(seed);
  const order = pairs.map((_, i) => i);
  for (let i = order.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  const out: Batch[] = [];
  for (let i = 0; i < order.length; i += batchSize) {
    out.push(padBatch(order.slice(i, i + batchSize).map((k) => pairs[k])));
  }
  return out;
}
