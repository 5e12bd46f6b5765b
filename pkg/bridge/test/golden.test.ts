/** Replays fixtures/golden_client.jsonl, a byte-for-byte capture of what
 * the Python client writes during a handshake plus a pipelined batch of
 * next requests, and checks the replies the client would read back.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { logSumExp } from "../src/logmath.js";
import { TableModel } from "../src/models.js";
import { encode, type DistReply, type ServerMessage } from "../src/protocol.js";
import { handleLine } from "../src/server.js";

const GOLDEN = fileURLToPath(new URL("./fixtures/golden_client.jsonl", import.meta.url));
const TOY_TABLE = fileURLToPath(new URL("./fixtures/toy_table.json", import.meta.url));

function replay(): ServerMessage[] {
  const model = TableModel.load(TOY_TABLE);
  const lines = readFileSync(GOLDEN, "utf8").split("\n").filter((l) => l.length > 0);
  expect(lines).toHaveLength(5);
  return lines.map((line) => {
    const reply = handleLine(model, line, { name: "toy" });
    expect(reply).not.toBeNull();
    return reply as ServerMessage;
  });
}

describe("golden client transcript", () => {
  it("gets the reply sequence the client expects", () => {
    const [hello, d0, d1, e2, e3] = replay();
    expect(hello).toEqual({ op: "hello", version: 1, vocab_size: 8, name: "toy" });
    expect(d0).toMatchObject({ op: "dist", id: 0 });
    expect(d1).toMatchObject({ op: "dist", id: 1 });
    expect(e2).toEqual({ op: "err", id: 2, msg: "context must be a non-empty array of token ids" });
    expect(e3).toEqual({ op: "err", id: 3, msg: "context token outside vocab of size 8" });
  });

  it("serves the table row for [0, 1, 2] and the default for [5]", () => {
    const replies = replay();
    const row = (replies[1] as DistReply).logprobs.map((lp) => Math.exp(lp));
    const want = [0, 0, 0, 0.4, 0.3, 0.2, 0.05, 0.05];
    for (let t = 0; t < 8; t++) expect(row[t]).toBeCloseTo(want[t] as number, 9);
    for (const lp of (replies[2] as DistReply).logprobs) expect(lp).toBeCloseTo(-Math.log(8), 9);
  });

  it("keeps every served array finite and normalized within 1e-4", () => {
    for (const reply of replay()) {
      if (reply.op !== "dist") continue;
      for (const lp of reply.logprobs) {
        expect(Number.isFinite(lp)).toBe(true);
        expect(lp).toBeGreaterThanOrEqual(-1e9);
        expect(lp).toBeLessThanOrEqual(1e-6);
      }
      expect(Math.abs(logSumExp(reply.logprobs))).toBeLessThan(1e-4);
    }
  });

  it("encodes every reply as a single parseable line", () => {
    for (const reply of replay()) {
      const wire = encode(reply);
      expect(wire.endsWith("\n")).toBe(true);
      expect(wire.slice(0, -1)).not.toContain("\n");
      expect(JSON.parse(wire)).toEqual(reply);
    }
  });
});
