/** Dense ReLU networks in the compiler's JSON format: decimal-string
 * weights, `act` one of "relu" | "id". */

import { readFileSync, writeFileSync } from "node:fs";
import { Dual, Scalar } from "./dual.js";
import { parseRational } from "./lossProgram.js";
import { sampleUniform } from "./sampler.js";

export interface LayerSpec {
  W: number[][];
  b: number[];
  act: "relu" | "id";
}

export type NetworkWeights = LayerSpec[];

export interface NetworkDoc {
  layers: { W: (string | number)[][]; b: (string | number)[]; act: string }[];
}

export function fromDoc(doc: NetworkDoc): NetworkWeights {
  return doc.layers.map((layer) => ({
    W: layer.W.map((row) => row.map((x) =>
      typeof x === "number" ? x : parseRational(x))),
    b: layer.b.map((x) => (typeof x === "number" ? x : parseRational(x))),
    act: layer.act === "relu" ? "relu" : "id",
  }));
}

export function readNetwork(path: string): NetworkWeights {
  return fromDoc(JSON.parse(readFileSync(path, "utf8")) as NetworkDoc);
}

export function writeNetwork(path: string, net: NetworkWeights): void {
  const doc = {
    layers: net.map((layer) => ({
      W: layer.W.map((row) => row.map((x) => String(x))),
      b: layer.b.map((x) => String(x)),
      act: layer.act,
    })),
  };
  writeFileSync(path, JSON.stringify(doc, null, 1) + "\n");
}

export function paramCount(dims: number[]): number {
  let total = 0;
  for (let i = 0; i + 1 < dims.length; i++) {
    total += dims[i] * dims[i + 1] + dims[i + 1];
  }
  return total;
}

/** Seeded uniform init in +-sqrt(6 / (fanIn + fanOut)). */
export function initWeights(dims: number[], seed: number): Float64Array {
  const flat = new Float64Array(paramCount(dims));
  let k = 0;
  for (let l = 0; l + 1 < dims.length; l++) {
    const r = Math.sqrt(6 / (dims[l] + dims[l + 1]));
    const count = dims[l] * dims[l + 1] + dims[l + 1];
    for (let i = 0; i < count; i++, k++) {
      flat[k] = (2 * sampleUniform([seed, 0, k]) - 1) * r;
    }
  }
  return flat;
}

export function flatToLayers(flat: ArrayLike<number>,
                             dims: number[]): NetworkWeights {
  const layers: NetworkWeights = [];
  let k = 0;
  for (let l = 0; l + 1 < dims.length; l++) {
    const rows = dims[l + 1];
    const cols = dims[l];
    const W: number[][] = [];
    for (let r = 0; r < rows; r++) {
      const row: number[] = [];
      for (let c = 0; c < cols; c++) row.push(flat[k++]);
      W.push(row);
    }
    const b: number[] = [];
    for (let r = 0; r < rows; r++) b.push(flat[k++]);
    layers.push({ W, b, act: l + 2 === dims.length ? "id" : "relu" });
  }
  return layers;
}

/** Layers whose entries are Duals carrying unit tangents, for gradients. */
export type DualLayer = { W: Scalar[][]; b: Scalar[]; act: "relu" | "id" };

export function dualLayers(flat: Float64Array,
                           dims: number[]): DualLayer[] {
  const total = flat.length;
  const layers: DualLayer[] = [];
  let k = 0;
  const unit = (v: number, at: number): Dual => {
    const tan = new Float64Array(total);
    tan[at] = 1;
    return new Dual(v, tan);
  };
  for (let l = 0; l + 1 < dims.length; l++) {
    const rows = dims[l + 1];
    const cols = dims[l];
    const W: Scalar[][] = [];
    for (let r = 0; r < rows; r++) {
      const row: Scalar[] = [];
      for (let c = 0; c < cols; c++, k++) row.push(unit(flat[k], k));
      W.push(row);
    }
    const b: Scalar[] = [];
    for (let r = 0; r < rows; r++, k++) b.push(unit(flat[k], k));
    layers.push({ W, b, act: l + 2 === dims.length ? "id" : "relu" });
  }
  return layers;
}
