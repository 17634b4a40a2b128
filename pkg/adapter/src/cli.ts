/**
 * Command-line entry: train a guidance model on the core's exchange
 * files, emit beam candidates, or do both in one shot (the shape the
 * core's external_model_cmd expects).
 *
 * Exit codes: 0 ok, 1 training diverged (the core skips this model), 2
 * bad input.
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { initBackend } from "./backend";
import { AdapterConfig, DEFAULT_CONFIG } from "./model";
import { DivergenceError, infer, train } from "./train";

function configFrom(argv: Record<string, unknown>): AdapterConfig {
  const cfg = { ...DEFAULT_CONFIG };
  const numeric: (keyof AdapterConfig)[] = [
    "hiddenUnits", "embeddingDim", "layers", "steps", "batchSize", "beamWidth",
    "maxSrcLen", "maxTgtLen", "dataFraction", "learningRate", "clipNorm", "seed", "pruneLogp",
  ];
  for (const key of numeric) {
    const raw = argv[key as string];
    if (raw !== undefined) (cfg as any)[key] = Number(raw);
  }
  if (argv.continuous !== undefined) cfg.continuous = Boolean(argv.continuous);
  if (argv.optimizer !== undefined) cfg.optimizer = argv.optimizer as "sgd" | "adam";
  if (![1.0, 0.5, 0.25].includes(cfg.dataFraction)) {
    throw new Error(`dataFraction must be 1.0, 0.5 or 0.25, got ${cfg.dataFraction}`);
  }
  return cfg;
}

const configFlags = (y: yargs.Argv) =>
  y
    .option("hidden-units", { type: "number", alias: "hiddenUnits" })
    .option("embedding-dim", { type: "number", alias: "embeddingDim" })
    .option("layers", { type: "number" })
    .option("steps", { type: "number" })
    .option("batch-size", { type: "number", alias: "batchSize" })
    .option("beam-width", { type: "number", alias: "beamWidth" })
    .option("max-src-len", { type: "number", alias: "maxSrcLen" })
    .option("max-tgt-len", { type: "number", alias: "maxTgtLen" })
    .option("data-fraction", { type: "number", alias: "dataFraction" })
    .option("continuous", { type: "boolean" })
    .option("optimizer", { choices: ["sgd", "adam"] as const })
    .option("learning-rate", { type: "number", alias: "learningRate" })
    .option("clip-norm", { type: "number", alias: "clipNorm" })
    .option("seed", { type: "number" })
    .option("prune-logp", { type: "number", alias: "pruneLogp" });

async function main(): Promise<number> {
  await initBackend(process.env.ADAPTER_BACKEND ?? "wasm");

  let exitCode = 0;
  // yargs does not route handler exceptions through .fail(), so guard here
  const guarded = (fn: (argv: Record<string, unknown>) => void) => (argv: Record<string, unknown>) => {
    try {
      fn(argv);
    } catch (err) {
      if (err instanceof DivergenceError) {
        console.error(`diverged: ${err.message}`);
        exitCode = 1;
      } else {
        console.error(`error: ${err instanceof Error ? err.message : err}`);
        exitCode = 2;
      }
    }
  };

  await yargs(hideBin(process.argv))
    .command(
      "train",
      "fit a model on aligned train.src / train.tgt files",
      (y) =>
        configFlags(y)
          .option("train-src", { type: "string", demandOption: true })
          .option("train-tgt", { type: "string", demandOption: true })
          .option("checkpoint", { type: "string", demandOption: true }),
      guarded((argv) => {
        const cfg = configFrom(argv);
        const result = train(argv.trainSrc as string, argv.trainTgt as string, cfg, argv.checkpoint as string);
        console.log(
          `trained ${result.steps} steps; loss ${result.firstLoss.toFixed(4)} -> ${result.lastLoss.toFixed(4)}`,
        );
      }),
    )
    .command(
      "infer",
      "emit beam candidates for ANUM<TAB>terms source lines",
      (y) =>
        y
          .option("checkpoint", { type: "string", demandOption: true })
          .option("infer-src", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true })
          .option("beam-width", { type: "number", alias: "beamWidth" })
          .option("prune-logp", { type: "number", alias: "pruneLogp" }),
      guarded((argv) => {
        const result = infer(
          argv.checkpoint as string,
          argv.inferSrc as string,
          argv.out as string,
          argv.beamWidth as number | undefined,
          argv.pruneLogp as number | undefined,
        );
        console.log(`wrote ${result.lines} candidates for ${result.sequences} sequences`);
      }),
    )
    .command(
      "run",
      "train then infer in one invocation (core loop integration)",
      (y) =>
        configFlags(y)
          .option("train-src", { type: "string", demandOption: true })
          .option("train-tgt", { type: "string", demandOption: true })
          .option("infer-src", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true })
          .option("checkpoint", { type: "string", demandOption: true }),
      guarded((argv) => {
        const cfg = configFrom(argv);
        train(argv.trainSrc as string, argv.trainTgt as string, cfg, argv.checkpoint as string);
        const result = infer(argv.checkpoint as string, argv.inferSrc as string, argv.out as string, cfg.beamWidth, cfg.pruneLogp);
        console.log(`wrote ${result.lines} candidates for ${result.sequences} sequences`);
      }),
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(`error: ${msg ?? err?.message}`);
      exitCode = 2;
    })
    .parseAsync();
  return exitCode;
}

main().then((code) => {
  process.exitCode = code;
});
