/** Wire protocol: one JSON object per line.
 *
 * client -> {"op": "hello", "version": 1}
 * server <- {"op": "hello", "version": 1, "vocab_size": V, "name": string}
 * client -> {"op": "next", "id": N, "context": [token ids]}
 * server <- {"op": "dist", "id": N, "logprobs": [V finite floats]}
 * server <- {"op": "err", "id": N, "msg": string}
 *
 * Requests may be pipelined; replies carry the request id and may arrive
 * in completion order.
 */

import { z } from "zod";

export const PROTOCOL_VERSION = 1;

const tokenId = z.number().int().nonnegative();

export const helloRequest = z.object({
  op: z.literal("hello"),
  version: z.number().int(),
});

export const nextRequest = z.object({
  op: z.literal("next"),
  id: z.number().int().nonnegative(),
  context: z.array(tokenId),
});

export const clientMessage = z.discriminatedUnion("op", [helloRequest, nextRequest]);

export type HelloRequest = z.infer<typeof helloRequest>;
export type NextRequest = z.infer<typeof nextRequest>;
export type ClientMessage = z.infer<typeof clientMessage>;

export interface HelloReply {
  op: "hello";
  version: number;
  vocab_size: number;
  name: string;
}

export interface DistReply {
  op: "dist";
  id: number;
  logprobs: number[];
}

export interface ErrReply {
  op: "err";
  id: number;
  msg: string;
}

export type ServerMessage = HelloReply | DistReply | ErrReply;

export function encode(msg: ServerMessage): string {
  if (msg.op === "dist") {
    for (const lp of msg.logprobs) {
      if (!Number.isFinite(lp)) throw new Error(`non-finite logprob ${lp} in reply ${msg.id}`);
    }
  }
  return JSON.stringify(msg) + "\n";
}

export interface DecodeOk {
  ok: true;
  msg: ClientMessage;
}

export interface DecodeFail {
  ok: false;
  /** request id salvaged from the broken line, when one is recognizable */
  id: number | null;
  reason: string;
}

/** Parse one incoming line. Never throws: the server must answer garbage
 * with an err reply, not die. */
export function decodeLine(line: string): DecodeOk | DecodeFail {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch (e) {
    return { ok: false, id: salvageId(line), reason: `malformed message: ${(e as Error).message}` };
  }
  const parsed = clientMessage.safeParse(raw);
  if (!parsed.success) {
    const id =
      typeof raw === "object" && raw !== null && Number.isInteger((raw as { id?: unknown }).id)
        ? ((raw as { id: number }).id)
        : null;
    return { ok: false, id, reason: `invalid message: ${parsed.error.issues[0]?.message ?? "schema"}` };
  }
  return { ok: true, msg: parsed.data };
}

function salvageId(line: string): number | null {
  const m = /"id"\s*:\s*(\d+)/.exec(line);
  return m && m[1] !== undefined ? Number(m[1]) : null;
}
