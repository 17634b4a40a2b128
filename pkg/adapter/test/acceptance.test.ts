/**
 * Adapter acceptance: train on the 50-pair toy corpus, then
 *   - every emitted line passes the shared format validator,
 *   - >= 90% of the candidates decode in the core,
 *   - >= 80% of the training targets are reproduced at beam width 5,
 *   - the core loop completes an iteration with the adapter as its only
 *     guidance model.
 *
 * The core is exercised through its installed CLI (python3 -m
 * seqsynth.cli), which is the integration boundary.
 */

import { execFileSync } from "child_process";
import * as fs from "fs";
import * as path from "path";
import { beforeAll, describe, expect, it } from "vitest";

import { initBackend } from "../src/backend";
import { DEFAULT_CONFIG, DivergenceError } from "../src/model";
import { infer, train } from "../src/train";
import { candidateLineOk } from "../src/vocab";

const FIXTURES = path.join(__dirname, "fixtures");
const ADAPTER_ROOT = path.resolve(__dirname, "..");

const TOY_CONFIG = {
  ...DEFAULT_CONFIG,
  hiddenUnits: 56,
  embeddingDim: 28,
  steps: 750,
  batchSize: 25,
  beamWidth: 5,
  maxSrcLen: 32,
  maxTgtLen: 26,
  optimizer: "adam" as const,
  learningRate: 0.02,
  seed: 1,
};

function corePython(args: string[], cwd?: string): string {
  return execFileSync("python3", ["-m", "seqsynth.cli", ...args], {
    cwd: cwd ?? ADAPTER_ROOT,
    encoding: "utf-8",
  });
}

function coreDecodes(tokenLines: string[]): number {
  // counts how many token strings the core's decoder accepts
  const script =
    "import sys\n" +
    "from seqsynth.lang import decode_tokens, LangError\n" +
    "ok = 0\n" +
    "for line in sys.stdin.read().splitlines():\n" +
    "    try:\n" +
    "        decode_tokens(line.split())\n" +
    "        ok += 1\n" +
    "    except LangError:\n" +
    "        pass\n" +
    "print(ok)\n";
  const out = execFileSync("python3", ["-c", script], {
    input: tokenLines.join("\n"),
    encoding: "utf-8",
  });
  return parseInt(out.trim(), 10);
}

beforeAll(async () => {
  await initBackend();
});

describe("toy-corpus acceptance", () => {
  const work = fs.mkdtempSync("/tmp/adapter-accept-");
  const checkpoint = path.join(work, "ckpt");
  const candidates = path.join(work, "candidates.txt");

  it(
    "trains, memorizes and emits decodable candidates",
    () => {
      const result = train(
        path.join(FIXTURES, "train.src"),
        path.join(FIXTURES, "train.tgt"),
        TOY_CONFIG,
        checkpoint,
        () => {},
      );
      expect(result.lastLoss).toBeLessThan(result.firstLoss);

      const inf = infer(checkpoint, path.join(FIXTURES, "infer.src"), candidates, 5, undefined, () => {});
      expect(inf.sequences).toBe(50);

      const lines = fs
        .readFileSync(candidates, "utf-8")
        .split("\n")
        .filter((l) => l.length > 0);
      expect(lines.length).toBeGreaterThan(0);
      expect(lines.length).toBeLessThanOrEqual(250); // beam width 5 x 50 sequences

      // shared format validator: every line well-formed
      for (const line of lines) {
        expect(candidateLineOk(line), `malformed line: ${line}`).toBe(true);
      }

      // >= 90% of candidates decode in the core
      const texts = lines.map((l) => l.split("\t")[1]);
      const decodable = coreDecodes(texts);
      expect(decodable / texts.length).toBeGreaterThanOrEqual(0.9);

      // >= 80% of training targets reproduced at beam width 5
      const targets = fs
        .readFileSync(path.join(FIXTURES, "train.tgt"), "utf-8")
        .split("\n")
        .filter((l) => l.length > 0);
      const byAnum = new Map<string, Set<string>>();
      for (const line of lines) {
        const [anum, text] = line.split("\t");
        if (!byAnum.has(anum)) byAnum.set(anum, new Set());
        byAnum.get(anum)!.add(text);
      }
      let reproduced = 0;
      targets.forEach((target, i) => {
        const anum = "A" + String(910000 + i).padStart(6, "0");
        if (byAnum.get(anum)?.has(target)) reproduced += 1;
      });
      expect(reproduced / targets.length).toBeGreaterThanOrEqual(0.8);

      console.log(
        `adapter acceptance: loss ${result.firstLoss.toFixed(2)} -> ${result.lastLoss.toFixed(3)}, ` +
          `${lines.length} candidates, ${decodable} decode (${((100 * decodable) / texts.length).toFixed(1)}%), ` +
          `${reproduced}/50 targets reproduced`,
      );
    },
    15 * 60_000,
  );

  it(
    "core check accepts the candidates file wholesale",
    () => {
      const outDir = path.join(work, "check-out");
      corePython([
        "check",
        "--pool", candidates,
        "--corpus", path.join(FIXTURES, "toy_corpus.txt"),
        "--mode", "fast",
        "--out", outDir,
        "--jobs", "1",
      ]);
      const report = JSON.parse(fs.readFileSync(path.join(outDir, "report.json"), "utf-8"));
      expect(report.checked).toBeGreaterThan(0);
      // memorized candidates re-solve their sequences through the core
      expect(report.total_solutions).toBeGreaterThanOrEqual(40);
    },
    5 * 60_000,
  );
});

describe("core loop integration", () => {
  it(
    "completes an iteration with the adapter as the only guidance model",
    () => {
      const work = fs.mkdtempSync("/tmp/adapter-loop-");
      const runDir = path.join(work, "run");
      const cli = path.join(ADAPTER_ROOT, "dist", "cli.js");
      const cmd =
        `node ${cli} run --train-src {train_src} --train-tgt {train_tgt} ` +
        `--infer-src {src} --out {out} --checkpoint ${path.join(work, "ckpt")} ` +
        `--hidden-units 16 --embedding-dim 12 --steps 40 --batch-size 16 ` +
        `--beam-width 3 --max-src-len 32 --max-tgt-len 24 ` +
        `--optimizer adam --learning-rate 0.02 --seed 5`;
      const cfg = [
        `corpus = ${path.join(FIXTURES, "toy_corpus.txt")}`,
        `out_dir = ${runDir}`,
        "iterations = 2",
        "seed = 9",
        "jobs = 1",
        "random_count = 500",
        "random_max_size = 12",
        "models = ",
        `external_model_cmd = ${cmd}`,
      ].join("\n");
      const cfgPath = path.join(work, "loop.cfg");
      fs.writeFileSync(cfgPath, cfg + "\n");

      const out = corePython(["loop", "--config", cfgPath]);
      expect(out).toContain("iter 0:");
      expect(out).toContain("iter 1:");
      const iter1 = path.join(runDir, "iter_0001");
      expect(fs.existsSync(path.join(iter1, "external_candidates.txt"))).toBe(true);
      expect(fs.existsSync(path.join(iter1, "solutions.tsv"))).toBe(true);
      expect(fs.existsSync(path.join(iter1, "report.json"))).toBe(true);
      const report = JSON.parse(fs.readFileSync(path.join(iter1, "report.json"), "utf-8"));
      expect(report.checked).toBeGreaterThan(0);
    },
    10 * 60_000,
  );
});

describe("divergence handling", () => {
  const divergentFlags = [
    "--hidden-units", "16", "--embedding-dim", "8", "--steps", "10",
    "--batch-size", "25", "--max-src-len", "32", "--max-tgt-len", "26",
    "--optimizer", "sgd", "--learning-rate", "Infinity", "--seed", "2",
  ];

  it("reports divergence instead of writing a checkpoint", () => {
    const work = fs.mkdtempSync("/tmp/adapter-div-");
    const cfg = {
      ...DEFAULT_CONFIG,
      hiddenUnits: 16,
      embeddingDim: 8,
      steps: 10,
      batchSize: 25,
      maxSrcLen: 32,
      maxTgtLen: 26,
      optimizer: "sgd" as const,
      learningRate: Infinity,
      seed: 2,
    };
    expect(() =>
      train(path.join(FIXTURES, "train.src"), path.join(FIXTURES, "train.tgt"), cfg, work, () => {}),
    ).toThrow(DivergenceError);
    expect(fs.existsSync(path.join(work, "model.json"))).toBe(false);
  }, 120_000);

  it("exits nonzero through the CLI so the core loop can skip the model", () => {
    const work = fs.mkdtempSync("/tmp/adapter-div-cli-");
    let status = 0;
    try {
      execFileSync(
        "node",
        [
          path.join(ADAPTER_ROOT, "dist", "cli.js"), "train",
          "--train-src", path.join(FIXTURES, "train.src"),
          "--train-tgt", path.join(FIXTURES, "train.tgt"),
          "--checkpoint", path.join(work, "ckpt"),
          ...divergentFlags,
        ],
        { encoding: "utf-8", stdio: "pipe" },
      );
    } catch (err: any) {
      status = err.status;
    }
    expect(status).toBe(1);
  }, 120_000);
});
