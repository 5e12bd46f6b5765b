/** Turn raw text into the scoring dataset format: JSONL records with
 * prefix/suffix token id arrays of exact lengths.
 *
 * The token stream is cut into consecutive non-overlapping windows of
 * prefix_len + suffix_len tokens; a leftover shorter than one window is
 * skipped and counted. Because the tokenizer is reversible, decoding a
 * record's prefix + suffix reproduces the exact source span.
 */

import { Tokenizer } from "./tokenizer.js";

export interface PrepRecord {
  id: string;
  prefix: number[];
  suffix: number[];
  tags: { source: string };
}

export interface PrepareResult {
  records: PrepRecord[];
  skipped: number;
  tokenizer: Tokenizer;
  totalTokens: number;
}

export function prepareDataset(
  text: string,
  prefixLen: number,
  suffixLen: number,
  source = "text",
): PrepareResult {
  if (!Number.isInteger(prefixLen) || prefixLen < 1) {
    throw new Error(`prefix_len must be >= 1, got ${prefixLen}`);
  }
  if (!Number.isInteger(suffixLen) || suffixLen < 1) {
    throw new Error(`suffix_len must be >= 1, got ${suffixLen}`);
  }
  const tokenizer = new Tokenizer();
  const ids = tokenizer.encode(text);
  const window = prefixLen + suffixLen;
  const records: PrepRecord[] = [];
  let start = 0;
  while (start + window <= ids.length) {
    records.push({
      id: `${source}-${String(records.length + 1).padStart(6, "0")}`,
      prefix: ids.slice(start, start + prefixLen),
      suffix: ids.slice(start + prefixLen, start + window),
      tags: { source },
    });
    start += window;
  }
  const skipped = start < ids.length ? 1 : 0;
  return { records, skipped, tokenizer, totalTokens: ids.length };
}

export function toJsonl(records: readonly PrepRecord[]): string {
  return records.map((r) => JSON.stringify(r)).join("\n") + (records.length ? "\n" : "");
}
