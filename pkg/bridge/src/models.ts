/** Local model backends for serving: a JSON lookup table and an add-alpha
 * n-gram, file-compatible with the Python side so either end can host the
 * same model. Both return normalized log-probabilities with exact
 * -Infinity zeros; the server clamps for the wire.
 */

import { readFileSync } from "node:fs";
import { logProbsFromProbs } from "./logmath.js";

export interface LanguageModel {
  readonly vocabSize: number;
  readonly name: string;
  /** Normalized next-token log-probabilities for a non-empty context. */
  logprobs(context: readonly number[]): number[];
}

interface TableFile {
  vocab_size: number;
  default: number[];
  entries?: { context: number[]; probs: number[] }[];
}

const key = (ctx: readonly number[]) => ctx.join(",");

export class TableModel implements LanguageModel {
  readonly vocabSize: number;
  readonly name: string;
  private readonly fallback: number[];
  private readonly rows = new Map<string, number[]>();

  constructor(file: TableFile, name = "table") {
    if (!Number.isInteger(file.vocab_size) || file.vocab_size < 1) {
      throw new Error(`bad vocab_size ${file.vocab_size}`);
    }
    this.vocabSize = file.vocab_size;
    this.name = name;
    this.fallback = this.row(file.default);
    for (const e of file.entries ?? []) {
      for (const t of e.context) this.checkToken(t);
      this.rows.set(key(e.context), this.row(e.probs));
    }
  }

  static load(path: string): TableModel {
    return new TableModel(JSON.parse(readFileSync(path, "utf8")) as TableFile, path);
  }

  private row(probs: number[]): number[] {
    if (probs.length !== this.vocabSize) {
      throw new Error(`row length ${probs.length} != vocab_size ${this.vocabSize}`);
    }
    return logProbsFromProbs(probs);
  }

  private checkToken(t: number): void {
    if (!Number.isInteger(t) || t < 0 || t >= this.vocabSize) {
      throw new Error(`token ${t} outside vocab of size ${this.vocabSize}`);
    }
  }

  logprobs(context: readonly number[]): number[] {
    for (const t of context) this.checkToken(t);
    return (this.rows.get(key(context)) ?? this.fallback).slice();
  }
}

/** Order-k model conditioning on the last k-1 tokens, additive smoothing
 * (count + alpha) / (total + alpha * V). Unseen contexts are uniform. */
export class NGramModel implements LanguageModel {
  readonly vocabSize: number;
  readonly name: string;
  readonly order: number;
  readonly alpha: number;
  private readonly counts = new Map<string, Float64Array>();

  constructor(corpus: readonly number[], order: number, alpha: number, vocabSize?: number) {
    if (!Number.isInteger(order) || order < 1) throw new Error(`order must be >= 1, got ${order}`);
    if (!(alpha >= 0)) throw new Error(`alpha must be >= 0, got ${alpha}`);
    if (corpus.length < order) {
      throw new Error(`corpus of ${corpus.length} tokens is shorter than order ${order}`);
    }
    const maxTok = Math.max(...corpus);
    this.vocabSize = vocabSize ?? maxTok + 1;
    if (maxTok >= this.vocabSize) throw new Error(`token ${maxTok} outside vocab`);
    this.order = order;
    this.alpha = alpha;
    this.name = `ngram-${order}`;
    for (let i = order - 1; i < corpus.length; i++) {
      const ctx = key(corpus.slice(i - order + 1, i));
      let row = this.counts.get(ctx);
      if (!row) {
        row = new Float64Array(this.vocabSize);
        this.counts.set(ctx, row);
      }
      const t = corpus[i] as number;
      row[t] = (row[t] ?? 0) + 1;
    }
  }

  static load(path: string, order: number, alpha: number): NGramModel {
    const ids = readFileSync(path, "utf8")
      .split(/\s+/)
      .filter((s) => s.length > 0)
      .map((s) => {
        const v = Number(s);
        if (!Number.isInteger(v) || v < 0) throw new Error(`bad corpus token ${JSON.stringify(s)}`);
        return v;
      });
    return new NGramModel(ids, order, alpha);
  }

  logprobs(context: readonly number[]): number[] {
    for (const t of context) {
      if (!Number.isInteger(t) || t < 0 || t >= this.vocabSize) {
        throw new Error(`token ${t} outside vocab of size ${this.vocabSize}`);
      }
    }
    const window = context.slice(Math.max(0, context.length - (this.order - 1)));
    const row = this.counts.get(key(window));
    const V = this.vocabSize;
    if (!row) return new Array<number>(V).fill(-Math.log(V));
    let total = 0;
    for (let t = 0; t < V; t++) total += row[t] as number;
    if (total === 0 && this.alpha === 0) return new Array<number>(V).fill(-Math.log(V));
    const denom = total + this.alpha * V;
    const out = new Array<number>(V);
    for (let t = 0; t < V; t++) {
      const p = ((row[t] as number) + this.alpha) / denom;
      out[t] = p === 0 ? -Infinity : Math.log(p);
    }
    return out;
  }
}

/** Model source specs, same grammar both sides of the wire:
 * table:PATH | ngram:PATH,ORDER[,ALPHA]
 */
export function loadModel(spec: string): LanguageModel {
  const sep = spec.indexOf(":");
  if (sep < 0) throw new Error(`model spec needs a kind prefix, got ${JSON.stringify(spec)}`);
  const kind = spec.slice(0, sep);
  const rest = spec.slice(sep + 1);
  if (kind === "table") return TableModel.load(rest);
  if (kind === "ngram") {
    const parts = rest.split(",");
    if (parts.length < 2 || parts.length > 3) {
      throw new Error(`ngram spec is ngram:PATH,ORDER[,ALPHA], got ${JSON.stringify(spec)}`);
    }
    const order = Number(parts[1]);
    const alpha = parts.length === 3 ? Number(parts[2]) : 1.0;
    if (!Number.isFinite(order) || !Number.isFinite(alpha)) {
      throw new Error(`bad ngram parameters in ${JSON.stringify(spec)}`);
    }
    return NGramModel.load(parts[0] as string, order, alpha);
  }
  throw new Error(`unknown model kind ${JSON.stringify(kind)}`);
}
