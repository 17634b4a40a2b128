/** Training and inference drivers around the model. */

import * as fs from "fs";
import * as path from "path";

import { batches, readInferenceSources, readPairs, selectFraction } from "./data";
import { AdapterConfig, DivergenceError, Seq2SeqModel } from "./model";
import { beamDecode } from "./beam";

export interface TrainResult {
  firstLoss: number;
  lastLoss: number;
  steps: number;
  checkpointDir: string;
}

export function loadCheckpoint(dir: string): Seq2SeqModel {
  return Seq2SeqModel.deserialize(fs.readFileSync(path.join(dir, "model.json"), "utf-8"));
}

export function saveCheckpoint(model: Seq2SeqModel, dir: string): void {
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(path.join(dir, "model.json"), model.serialize());
  fs.writeFileSync(path.join(dir, "config.json"), JSON.stringify(model.cfg, null, 2) + "\n");
}

export function train(
  trainSrc: string,
  trainTgt: string,
  cfg: AdapterConfig,
  checkpointDir: string,
  log: (line: string) => void = console.log,
): TrainResult {
  const all = readPairs(trainSrc, trainTgt, cfg.maxSrcLen, cfg.maxTgtLen);
  if (all.length === 0) throw new Error("no training pairs");
  const pairs = selectFraction(all, cfg.dataFraction, cfg.seed);
  log(`training on ${pairs.length}/${all.length} pairs (fraction ${cfg.dataFraction})`);

  let model: Seq2SeqModel;
  if (cfg.continuous && fs.existsSync(path.join(checkpointDir, "model.json"))) {
    model = loadCheckpoint(checkpointDir);
    log(`resumed checkpoint at step ${model.step}`);
  } else {
    model = new Seq2SeqModel(cfg);
  }
  const optimizer = model.makeOptimizer();

  let firstLoss = NaN;
  let lastLoss = NaN;
  let done = 0;
  let epoch = 0;
  while (done < cfg.steps) {
    const epochBatches = batches(pairs, cfg.batchSize, cfg.seed + 7919 * epoch + model.step);
    epoch += 1;
    for (const batch of epochBatches) {
      if (done >= cfg.steps) break;
      const loss = model.trainStep(batch, optimizer);
      if (done === 0) firstLoss = loss;
      lastLoss = loss;
      done += 1;
      if (done % 50 === 0 || done === cfg.steps) {
        log(`step ${model.step} loss ${loss.toFixed(4)}`);
      }
    }
  }
  saveCheckpoint(model, checkpointDir);
  model.dispose();
  return { firstLoss, lastLoss, steps: done, checkpointDir };
}

export interface InferResult {
  sequences: number;
  lines: number;
  skipped: number;
}

export function infer(
  checkpointDir: string,
  srcPath: string,
  outPath: string,
  beamWidth?: number,
  pruneLogp?: number,
  log: (line: string) => void = console.log,
): InferResult {
  const model = loadCheckpoint(checkpointDir);
  const width = beamWidth ?? model.cfg.beamWidth;
  const prune = pruneLogp ?? model.cfg.pruneLogp;
  const { entries, skipped } = readInferenceSources(srcPath, model.cfg.maxSrcLen);
  const out: string[] = [];
  for (const entry of entries) {
    const results = beamDecode(model, entry.src, width, model.cfg.maxTgtLen, prune);
    for (const r of results) out.push(`${entry.anum}\t${r.text}`);
  }
  fs.writeFileSync(outPath, out.length ? out.join("\n") + "\n" : "");
  if (skipped) log(`skipped ${skipped} malformed source lines`);
  model.dispose();
  return { sequences: entries.length, lines: out.length, skipped };
}

export { DivergenceError };
