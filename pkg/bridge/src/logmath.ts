/** Log-space helpers. Wire arrays must stay finite, so exact zeros are
 * clamped to FINITE_LOG_ZERO before serialization; exp(-1e9) underflows to
 * 0 in IEEE double, so clamping never perturbs the distribution. */

export const FINITE_LOG_ZERO = -1e9;

export function logSumExp(xs: readonly number[]): number {
  let max = -Infinity;
  for (const x of xs) if (x > max) max = x;
  if (max === -Infinity) return -Infinity;
  let acc = 0;
  for (const x of xs) acc += Math.exp(x - max);
  return max + Math.log(acc);
}

/** ln of each probability, exact -Infinity for zeros. Rejects rows that
 * are not a distribution. */
export function logProbsFromProbs(probs: readonly number[], tol = 1e-9): number[] {
  let sum = 0;
  for (const p of probs) {
    if (!Number.isFinite(p) || p < 0) throw new Error(`bad probability ${p}`);
    sum += p;
  }
  if (Math.abs(sum - 1) > tol) throw new Error(`probabilities sum to ${sum}, not 1`);
  return probs.map((p) => (p === 0 ? -Infinity : Math.log(p)));
}

/** Shift so logsumexp is exactly ~0, then clamp -Infinity for the wire. */
export function finiteNormalized(logprobs: readonly number[]): number[] {
  const z = logSumExp(logprobs);
  if (z === -Infinity) throw new Error("all-zero distribution");
  return logprobs.map((lp) => {
    const v = lp - z;
    return v === -Infinity ? FINITE_LOG_ZERO : v;
  });
}
