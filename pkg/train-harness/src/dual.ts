/**
 * Forward-mode scalars: a value plus a dense tangent over all trainable
 * weights.  Ties at max/min kinks take the left branch's subgradient,
 * matching the compiler's interpreter.
 */

export class Dual {
  constructor(public val: number, public tan: Float64Array) {}
}

export type Scalar = number | Dual;

export const valueOf = (x: Scalar): number =>
  x instanceof Dual ? x.val : x;

function zipTan(a: Float64Array, b: Float64Array,
                f: (x: number, y: number) => number): Float64Array {
  const out = new Float64Array(a.length);
  for (let i = 0; i < a.length; i++) out[i] = f(a[i], b[i]);
  return out;
}

function mapTan(a: Float64Array, f: (x: number) => number): Float64Array {
  const out = new Float64Array(a.length);
  for (let i = 0; i < a.length; i++) out[i] = f(a[i]);
  return out;
}

export function add(a: Scalar, b: Scalar): Scalar {
  if (a instanceof Dual && b instanceof Dual) {
    return new Dual(a.val + b.val, zipTan(a.tan, b.tan, (x, y) => x + y));
  }
  if (a instanceof Dual) return new Dual(a.val + (b as number), a.tan);
  if (b instanceof Dual) return new Dual((a as number) + b.val, b.tan);
  return a + b;
}

export function sub(a: Scalar, b: Scalar): Scalar {
  if (a instanceof Dual && b instanceof Dual) {
    return new Dual(a.val - b.val, zipTan(a.tan, b.tan, (x, y) => x - y));
  }
  if (a instanceof Dual) return new Dual(a.val - (b as number), a.tan);
  if (b instanceof Dual) {
    return new Dual((a as number) - b.val, mapTan(b.tan, (x) => -x));
  }
  return a - b;
}

export function mul(a: Scalar, b: Scalar): Scalar {
  if (a instanceof Dual && b instanceof Dual) {
    return new Dual(a.val * b.val,
      zipTan(a.tan, b.tan, (x, y) => x * b.val + y * a.val));
  }
  if (a instanceof Dual) {
    const k = b as number;
    return new Dual(a.val * k, mapTan(a.tan, (x) => x * k));
  }
  if (b instanceof Dual) {
    const k = a as number;
    return new Dual(k * b.val, mapTan(b.tan, (x) => x * k));
  }
  return a * b;
}

export function div(a: Scalar, b: Scalar): Scalar {
  if (a instanceof Dual && b instanceof Dual) {
    const d = b.val * b.val;
    return new Dual(a.val / b.val,
      zipTan(a.tan, b.tan, (x, y) => (x * b.val - y * a.val) / d));
  }
  if (a instanceof Dual) {
    const k = b as number;
    return new Dual(a.val / k, mapTan(a.tan, (x) => x / k));
  }
  if (b instanceof Dual) {
    const k = a as number;
    return new Dual(k / b.val, mapTan(b.tan, (x) => -k * x / (b.val * b.val)));
  }
  return a / b;
}

export function neg(a: Scalar): Scalar {
  if (a instanceof Dual) return new Dual(-a.val, mapTan(a.tan, (x) => -x));
  return -a;
}

export function fmax(a: Scalar, b: Scalar): Scalar {
  return valueOf(a) >= valueOf(b) ? a : b;
}

export function fmin(a: Scalar, b: Scalar): Scalar {
  return valueOf(a) <= valueOf(b) ? a : b;
}

export function fpow(base: Scalar, exponent: number): Scalar {
  const bv = valueOf(base);
  if (base instanceof Dual) {
    if (bv <= 0) return new Dual(0, new Float64Array(base.tan.length));
    const d = exponent * Math.pow(bv, exponent - 1);
    return new Dual(Math.pow(bv, exponent), mapTan(base.tan, (x) => x * d));
  }
  return bv <= 0 ? 0 : Math.pow(bv, exponent);
}

export function indicator(rel: "eq" | "le" | "lt", x: Scalar): number {
  const v = valueOf(x);
  const hold = rel === "eq" ? v === 0 : rel === "le" ? v <= 0 : v < 0;
  return hold ? 1 : 0;
}
