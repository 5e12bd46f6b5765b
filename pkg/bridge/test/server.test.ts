import { connect } from "node:net";
import { PassThrough } from "node:stream";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { logSumExp } from "../src/logmath.js";
import { TableModel } from "../src/models.js";
import { encode, type ServerMessage } from "../src/protocol.js";
import { handleLine, serveStream, serveTcp } from "../src/server.js";

const TOY_TABLE = fileURLToPath(new URL("./fixtures/toy_table.json", import.meta.url));
const model = TableModel.load(TOY_TABLE);

describe("handleLine", () => {
  it("answers hello with the protocol version and vocab size", () => {
    const r = handleLine(model, '{"op": "hello", "version": 1}');
    expect(r).toEqual({ op: "hello", version: 1, vocab_size: 8, name: TOY_TABLE });
  });

  it("lets the serve options rename the model", () => {
    const r = handleLine(model, '{"op": "hello", "version": 1}', { name: "toy" });
    expect(r).toMatchObject({ op: "hello", name: "toy" });
  });

  it("rejects other protocol versions", () => {
    const r = handleLine(model, '{"op": "hello", "version": 2}');
    expect(r).toMatchObject({ op: "err", msg: "unsupported protocol version 2" });
  });

  it("serves finite normalized logprobs", () => {
    const r = handleLine(model, '{"op": "next", "id": 5, "context": [0, 1, 2]}');
    expect(r).toMatchObject({ op: "dist", id: 5 });
    const lps = (r as { logprobs: number[] }).logprobs;
    expect(lps).toHaveLength(8);
    for (const lp of lps) expect(Number.isFinite(lp)).toBe(true);
    expect(Math.abs(logSumExp(lps))).toBeLessThan(1e-4);
    expect(Math.exp(lps[3] as number)).toBeCloseTo(0.4, 9);
    expect(Math.exp(lps[0] as number)).toBe(0);
  });

  it("is deterministic line for line", () => {
    const line = '{"op": "next", "id": 0, "context": [0, 1, 2]}';
    const a = encode(handleLine(model, line) as ServerMessage);
    const b = encode(handleLine(model, line) as ServerMessage);
    expect(a).toBe(b);
  });

  it("rejects an empty context", () => {
    const r = handleLine(model, '{"op": "next", "id": 2, "context": []}');
    expect(r).toEqual({ op: "err", id: 2, msg: "context must be a non-empty array of token ids" });
  });

  it("rejects contexts beyond the configured maximum", () => {
    const line = '{"op": "next", "id": 9, "context": [1, 1, 1, 1, 1]}';
    const r = handleLine(model, line, { maxContext: 4 });
    expect(r).toMatchObject({ op: "err", id: 9, msg: "context of 5 tokens exceeds max 4" });
    expect(handleLine(model, line)).toMatchObject({ op: "dist", id: 9 });
  });

  it("rejects out-of-vocab tokens with the vocab size in the message", () => {
    const r = handleLine(model, '{"op": "next", "id": 3, "context": [99]}');
    expect(r).toEqual({ op: "err", id: 3, msg: "context token outside vocab of size 8" });
  });

  it("skips blank lines and answers garbage with an err reply", () => {
    expect(handleLine(model, "")).toBeNull();
    expect(handleLine(model, "   \t")).toBeNull();
    const r = handleLine(model, '{"op": "next", "id": 12, "context": [0,');
    expect(r).toMatchObject({ op: "err", id: 12 });
  });
});

async function roundTrip(lines: string[], replies: number): Promise<ServerMessage[]> {
  const input = new PassThrough();
  const output = new PassThrough();
  const done = serveStream(model, input, output, { name: "toy" });
  input.end(lines.join("\n") + "\n");
  await done;
  const raw = output.read() as Buffer | null;
  const got = (raw ?? Buffer.alloc(0))
    .toString("utf8")
    .split("\n")
    .filter((l) => l.length > 0)
    .map((l) => JSON.parse(l) as ServerMessage);
  expect(got).toHaveLength(replies);
  return got;
}

describe("serveStream", () => {
  it("answers a pipelined batch one reply per request", async () => {
    const got = await roundTrip(
      [
        '{"op": "hello", "version": 1}',
        '{"op": "next", "id": 0, "context": [0, 1, 2]}',
        '{"op": "next", "id": 1, "context": [5]}',
        "",
        '{"op": "next", "id": 2, "context": []}',
      ],
      4,
    );
    expect(got.map((m) => m.op)).toEqual(["hello", "dist", "dist", "err"]);
    expect(got.slice(1).map((m) => (m as { id: number }).id)).toEqual([0, 1, 2]);
  });

  it("keeps serving after malformed input", async () => {
    const got = await roundTrip(
      ["%%%", '{"op": "next", "id": 1, "context": [3]}'],
      2,
    );
    expect(got[0]).toMatchObject({ op: "err", id: 0 });
    expect(got[1]).toMatchObject({ op: "dist", id: 1 });
  });
});

describe("serveTcp", () => {
  it("speaks the same protocol over a socket", async () => {
    const server = serveTcp(model, 0, { name: "tcp-toy" });
    await new Promise<void>((res) => server.once("listening", res));
    const addr = server.address();
    const port = typeof addr === "object" && addr ? addr.port : 0;
    const replies = await new Promise<ServerMessage[]>((resolve, reject) => {
      const sock = connect(port, "127.0.0.1");
      let buf = "";
      sock.on("error", reject);
      sock.on("data", (chunk) => {
        buf += chunk.toString("utf8");
        if (buf.split("\n").filter((l) => l.length > 0).length >= 2) sock.end();
      });
      sock.on("close", () => {
        resolve(buf.split("\n").filter((l) => l.length > 0).map((l) => JSON.parse(l) as ServerMessage));
      });
      sock.write('{"op": "hello", "version": 1}\n{"op": "next", "id": 0, "context": [0, 1, 2]}\n');
    });
    server.close();
    expect(replies[0]).toMatchObject({ op: "hello", vocab_size: 8, name: "tcp-toy" });
    expect(replies[1]).toMatchObject({ op: "dist", id: 0 });
  });
});
