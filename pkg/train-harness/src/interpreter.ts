/**
 * Loss program interpreter.
 *
 * Evaluation order mirrors the compiler's reference interpreter exactly
 * (same sample points, same left-folded reductions), so both components
 * compute the same value for the same weights and seed.  Scalars are
 * plain numbers for evaluation and Duals for gradient passes.
 */

import {
  Dual, Scalar, add, div, fmax, fmin, fpow, indicator, mul, neg, sub,
  valueOf,
} from "./dual.js";
import {
  LossProgram, Node, SampleNode, componentPaths, parseRational,
} from "./lossProgram.js";
import { DualLayer } from "./network.js";
import { sampleUniform } from "./sampler.js";

export interface Resources {
  networks: Record<string, { W: Scalar[][]; b: Scalar[]; act: string }[]>;
  parameters?: Record<string, number>;
  datasets?: Record<string, unknown>;
}

type Env = Map<string, Scalar>;

const envKey = (name: string, index: number[]) =>
  `${name}:${index.join(",")}`;

export class Interpreter {
  constructor(private program: LossProgram,
              private resources: Resources,
              private seed: number,
              private samples: number) {
    if (samples < 1) throw new Error("sample count must be >= 1");
  }

  run(): Scalar {
    return this.eval(this.program.root, new Map(), []);
  }

  private eval(node: Node, env: Env, outer: number[]): Scalar {
    switch (node.node) {
      case "const":
        return parseRational(node.value);
      case "var": {
        const v = env.get(envKey(node.name, node.index));
        if (v === undefined) {
          throw new Error(`unbound sample variable ${node.name}`);
        }
        return v;
      }
      case "param": {
        const v = this.resources.parameters?.[node.name];
        if (v === undefined) throw new Error(`unbound parameter ${node.name}`);
        return v;
      }
      case "data": {
        let v: unknown = this.resources.datasets?.[node.name];
        if (v === undefined) throw new Error(`unbound dataset ${node.name}`);
        for (const i of node.index) v = (v as unknown[])[i];
        return typeof v === "string" ? parseRational(v) : (v as number);
      }
      case "net": {
        const xs = node.args.map((a) => this.eval(a, env, outer));
        return this.forward(node.name, xs)[node.out];
      }
      case "add":
        return add(this.eval(node.lhs, env, outer),
                   this.eval(node.rhs, env, outer));
      case "sub":
        return sub(this.eval(node.lhs, env, outer),
                   this.eval(node.rhs, env, outer));
      case "mul":
        return mul(this.eval(node.lhs, env, outer),
                   this.eval(node.rhs, env, outer));
      case "div":
        return div(this.eval(node.lhs, env, outer),
                   this.eval(node.rhs, env, outer));
      case "max":
        return fmax(this.eval(node.lhs, env, outer),
                    this.eval(node.rhs, env, outer));
      case "min":
        return fmin(this.eval(node.lhs, env, outer),
                    this.eval(node.rhs, env, outer));
      case "neg":
        return neg(this.eval(node.arg, env, outer));
      case "pow":
        return fpow(this.eval(node.base, env, outer),
                    parseRational(node.exponent));
      case "indicator":
        return indicator(node.rel, this.eval(node.arg, env, outer));
      case "forall":
      case "exists":
        return this.sampleNode(node, env, outer);
    }
  }

  private forward(name: string, xs: Scalar[]): Scalar[] {
    const layers = this.resources.networks[name];
    if (!layers) throw new Error(`unbound network ${name}`);
    if (layers.length && layers[0].W[0].length !== xs.length) {
      throw new Error(`network ${name} expects ${layers[0].W[0].length} `
        + `inputs, the loss program supplies ${xs.length}`);
    }
    let vec = xs;
    for (const layer of layers) {
      const out: Scalar[] = [];
      for (let r = 0; r < layer.b.length; r++) {
        let acc: Scalar = layer.b[r];
        const row = layer.W[r];
        for (let c = 0; c < row.length; c++) {
          acc = add(acc, mul(row[c], vec[c]));
        }
        out.push(acc);
      }
      vec = layer.act === "relu" ? out.map((o) => fmax(o, 0)) : out;
    }
    return vec;
  }

  private sampleNode(node: SampleNode, env: Env, outer: number[]): Scalar {
    const paths = componentPaths(node.dims);
    const lo = node.lo.map(parseRational);
    const hi = node.hi.map(parseRational);
    const values: Scalar[] = [];
    for (let i = 0; i < this.samples; i++) {
      const inner = new Map(env);
      for (let d = 0; d < paths.length; d++) {
        const u = sampleUniform([this.seed, node.id, ...outer, i, d]);
        inner.set(envKey(node.var, paths[d]), lo[d] + u * (hi[d] - lo[d]));
      }
      values.push(this.eval(node.body, inner, [...outer, i]));
    }
    return aggregate(node.agg, values,
                     node.p === undefined ? undefined : parseRational(node.p));
  }
}

function aggregate(agg: string, values: Scalar[], p?: number): Scalar {
  const n = values.length;
  switch (agg) {
    case "mean": {
      let total = values[0];
      for (let i = 1; i < n; i++) total = add(total, values[i]);
      return total instanceof Dual ? mul(total, 1 / n)
        : (total as number) / n;
    }
    case "min":
    case "max": {
      let out = values[0];
      const pick = agg === "min" ? fmin : fmax;
      for (let i = 1; i < n; i++) out = pick(out, values[i]);
      return out;
    }
    case "luk-and":
    case "luk-or": {
      let total = values[0];
      for (let i = 1; i < n; i++) total = add(total, values[i]);
      return agg === "luk-and" ? fmax(sub(total, n - 1), 0)
        : fmin(total, 1);
    }
    case "prod-and":
    case "prod-or": {
      let out: Scalar = 1;
      for (const v of values) {
        out = mul(out, agg === "prod-and" ? v : mul(sub(1, v), 1));
      }
      return agg === "prod-and" ? out : sub(1, out);
    }
    case "yager-and":
    case "yager-or": {
      if (p === undefined) throw new Error("yager aggregation needs p");
      let total: Scalar = 0;
      for (const v of values) {
        const base = agg === "yager-and" ? sub(1, v) : v;
        total = add(total, fpow(base, p));
      }
      const root = fpow(total, 1 / p);
      return agg === "yager-and" ? fmax(sub(1, root), 0) : fmin(root, 1);
    }
    default:
      throw new Error(`unknown aggregator ${agg}`);
  }
}

export function evalLoss(program: LossProgram, resources: Resources,
                         seed: number, samples: number): number {
  return valueOf(new Interpreter(program, resources, seed, samples).run());
}

export function gradLoss(program: LossProgram,
                         dualNets: Record<string, DualLayer[]>,
                         resources: Omit<Resources, "networks">,
                         seed: number, samples: number,
                         total: number): { value: number; grad: Float64Array } {
  const interp = new Interpreter(
    program, { ...resources, networks: dualNets }, seed, samples);
  const out = interp.run();
  if (out instanceof Dual) return { value: out.val, grad: out.tan };
  return { value: out, grad: new Float64Array(total) };
}
