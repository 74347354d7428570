/**
 * Splittable counter-based sampling generator.
 *
 * A SplitMix64 finalizer is folded over the integer key chain
 * (seed, node id, enclosing sample indices..., sample index, component),
 * then the top 53 bits become a uniform double in [0, 1).  This mirrors
 * the compiler's interpreter bit for bit, so both sides evaluate a loss
 * program on identical sample points.
 */

const MASK = (1n << 64n) - 1n;
const GAMMA = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

function splitmix64(z: bigint): bigint {
  z = (z + GAMMA) & MASK;
  z = ((z ^ (z >> 30n)) * MIX1) & MASK;
  z = ((z ^ (z >> 27n)) * MIX2) & MASK;
  return z ^ (z >> 31n);
}

export function sampleUniform(keys: Iterable<number | bigint>): number {
  let h = 0n;
  for (const k of keys) {
    h = splitmix64((h ^ (BigInt(k) & MASK)) & MASK);
  }
  return Number(h >> 11n) * 2 ** -53;
}
