/**
 * Train a controller against an exported loss program and write the
 * result in the compiler's network format.
 *
 *   train --loss-program lp.json --epochs 200 --seed 0 --out net.json
 *         [--hidden 16] [--lr 0.1] [--samples 10] [--history hist.json]
 *
 * The optimizer is gradient descent with a fixed step length applied to
 * the normalized gradient (the raw-gradient variant oscillates on the
 * product-shaped DL2 landscape; see the harness README).  Seeded init
 * and counter-based sampling make runs bit-reproducible.
 */

import { readFileSync, writeFileSync } from "node:fs";
import process from "node:process";

import { gradLoss, evalLoss } from "./interpreter.js";
import { LossProgram, loadLossProgram } from "./lossProgram.js";
import {
  dualLayers, flatToLayers, initWeights, paramCount, writeNetwork,
} from "./network.js";

export interface TrainingRun {
  lossProgram: LossProgram;
  networkName: string;
  dims: number[];
  epochs: number;
  seed: number;
  samples: number;
  learningRate: number;
}

export interface TrainingResult {
  weights: Float64Array;
  history: number[];
  finalLoss: number;
}

export function train(run: TrainingRun): TrainingResult {
  const { dims } = run;
  const total = paramCount(dims);
  let weights = initWeights(dims, run.seed);
  const history: number[] = [];
  for (let epoch = 0; epoch < run.epochs; epoch++) {
    const nets = { [run.networkName]: dualLayers(weights, dims) };
    const { value, grad } = gradLoss(
      run.lossProgram, nets, {}, run.seed * 7919 + epoch, run.samples,
      total);
    if (!Number.isFinite(value)) {
      throw new Error(`training diverged at epoch ${epoch}: loss ${value}`);
    }
    history.push(value);
    let norm = 0;
    for (let i = 0; i < total; i++) norm += grad[i] * grad[i];
    norm = Math.sqrt(norm);
    if (!Number.isFinite(norm)) {
      // overflowed activations can launder NaN through max(., 0)
      throw new Error(
        `training diverged at epoch ${epoch}: gradient norm ${norm}`);
    }
    if (norm > 0) {
      const step = run.learningRate / norm;
      const next = new Float64Array(total);
      for (let i = 0; i < total; i++) next[i] = weights[i] - step * grad[i];
      weights = next;
    }
  }
  const finalLoss = evalLoss(
    run.lossProgram,
    { networks: { [run.networkName]: flatToLayers(weights, dims) } },
    999, Math.max(200, run.samples));
  return { weights, history, finalLoss };
}

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (!a.startsWith("--")) throw new Error(`unexpected argument ${a}`);
    out[a.slice(2)] = argv[++i];
  }
  return out;
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  const lpPath = args["loss-program"];
  const outPath = args["out"];
  if (!lpPath || !outPath) {
    console.error("usage: train --loss-program lp.json --epochs N "
      + "--seed S --out net.json [--hidden H] [--lr R] [--samples K]");
    return 2;
  }
  const program = loadLossProgram(
    JSON.parse(readFileSync(lpPath, "utf8")));
  const networks = Object.entries(program.networks ?? {});
  if (networks.length !== 1) {
    console.error("loss program must declare exactly one network");
    return 2;
  }
  const [name, [inputs, outputs]] = networks[0];
  const hidden = Number(args["hidden"] ?? 16);
  const run: TrainingRun = {
    lossProgram: program,
    networkName: name,
    dims: [inputs, hidden, hidden, outputs],
    epochs: Number(args["epochs"] ?? 200),
    seed: Number(args["seed"] ?? program.defaults?.seed ?? 0),
    samples: Number(args["samples"] ?? program.defaults?.samples ?? 10),
    learningRate: Number(args["lr"] ?? 0.1),
  };
  const result = train(run);
  writeNetwork(outPath, flatToLayers(result.weights, run.dims));
  if (args["history"]) {
    writeFileSync(args["history"],
      JSON.stringify({ history: result.history,
                       final: result.finalLoss }, null, 1) + "\n");
  }
  console.log(JSON.stringify({
    network: outPath,
    epochs: run.epochs,
    dims: run.dims,
    initialLoss: result.history[0] ?? null,
    finalSampledLoss: result.finalLoss,
  }));
  return 0;
}

const invokedDirectly = process.argv[1] !== undefined
  && import.meta.url.endsWith(
    process.argv[1].split("/").pop() as string);
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
