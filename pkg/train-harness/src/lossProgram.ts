/** Loss program wire format (`specbridge-loss/1`): a JSON term tree with
 * exact rationals as strings and sampling nodes carrying their domain. */

export type Node =
  | { node: "const"; value: string }
  | { node: "var"; name: string; index: number[] }
  | { node: "param"; name: string }
  | { node: "data"; name: string; index: number[] }
  | { node: "net"; name: string; args: Node[]; out: number }
  | { node: "add" | "sub" | "mul" | "div" | "max" | "min";
      lhs: Node; rhs: Node }
  | { node: "neg"; arg: Node }
  | { node: "pow"; base: Node; exponent: string }
  | { node: "indicator"; rel: "eq" | "le" | "lt"; arg: Node }
  | SampleNode;

export interface SampleNode {
  node: "forall" | "exists";
  id: number;
  var: string;
  dims: number[];
  lo: string[];
  hi: string[];
  agg: string;
  p?: string;
  body: Node;
}

export interface LossProgram {
  format: string;
  property?: string;
  logic?: string;
  networks?: Record<string, number[]>;
  sampling?: string;
  defaults?: { samples: number; seed: number };
  root: Node;
}

/** Exact rational strings: "p/q" or a decimal numeral. */
export function parseRational(text: string): number {
  const slash = text.indexOf("/");
  if (slash >= 0) {
    return Number(text.slice(0, slash)) / Number(text.slice(slash + 1));
  }
  return Number(text);
}

export function loadLossProgram(doc: unknown): LossProgram {
  const program = doc as LossProgram;
  if (!program || program.format !== "specbridge-loss/1") {
    throw new Error("not a loss program (bad format tag)");
  }
  return program;
}

/** Row-major component paths of a tensor shape; [()] for scalars. */
export function componentPaths(dims: number[]): number[][] {
  let paths: number[][] = [[]];
  for (const d of dims) {
    const next: number[][] = [];
    for (const p of paths) {
      for (let i = 0; i < d; i++) next.push([...p, i]);
    }
    paths = next;
  }
  return paths;
}
