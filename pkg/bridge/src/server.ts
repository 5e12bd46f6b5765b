/** Protocol server: single inference queue, one reply line per request
 * line, pipelining-safe because replies always carry the request id.
 */

import { createInterface } from "node:readline";
import { createServer, type Server, type Socket } from "node:net";
import type { Readable, Writable } from "node:stream";
import type { LanguageModel } from "./models.js";
import { finiteNormalized } from "./logmath.js";
import {
  PROTOCOL_VERSION,
  decodeLine,
  encode,
  type NextRequest,
  type ServerMessage,
} from "./protocol.js";

export interface ServeOptions {
  name?: string;
  /** Longest accepted context; bigger requests get an err reply. */
  maxContext?: number;
}

export function handleLine(model: LanguageModel, line: string, opts: ServeOptions = {}): ServerMessage | null {
  if (line.trim() === "") return null;
  const decoded = decodeLine(line);
  if (!decoded.ok) {
    return { op: "err", id: decoded.id ?? 0, msg: decoded.reason };
  }
  const msg = decoded.msg;
  if (msg.op === "hello") {
    if (msg.version !== PROTOCOL_VERSION) {
      return { op: "err", id: 0, msg: `unsupported protocol version ${msg.version}` };
    }
    return {
      op: "hello",
      version: PROTOCOL_VERSION,
      vocab_size: model.vocabSize,
      name: opts.name ?? model.name,
    };
  }
  return answerNext(model, msg, opts);
}

function answerNext(model: LanguageModel, req: NextRequest, opts: ServeOptions): ServerMessage {
  const maxContext = opts.maxContext ?? 4096;
  if (req.context.length === 0) {
    return { op: "err", id: req.id, msg: "context must be a non-empty array of token ids" };
  }
  if (req.context.length > maxContext) {
    return { op: "err", id: req.id, msg: `context of ${req.context.length} tokens exceeds max ${maxContext}` };
  }
  for (const t of req.context) {
    if (t >= model.vocabSize) {
      return { op: "err", id: req.id, msg: `context token outside vocab of size ${model.vocabSize}` };
    }
  }
  let logprobs: number[];
  try {
    logprobs = finiteNormalized(model.logprobs(req.context));
  } catch (e) {
    return { op: "err", id: req.id, msg: (e as Error).message };
  }
  return { op: "dist", id: req.id, logprobs };
}

/** Serve one byte stream pair until the input ends. */
export function serveStream(
  model: LanguageModel,
  input: Readable,
  output: Writable,
  opts: ServeOptions = {},
): Promise<void> {
  return new Promise((resolve) => {
    const rl = createInterface({ input, crlfDelay: Infinity });
    rl.on("line", (line) => {
      const reply = handleLine(model, line, opts);
      if (reply) output.write(encode(reply));
    });
    rl.on("close", resolve);
  });
}

export function serveTcp(model: LanguageModel, port: number, opts: ServeOptions = {}): Server {
  const server = createServer((sock: Socket) => {
    void serveStream(model, sock, sock, opts).then(() => sock.end());
  });
  server.listen(port);
  return server;
}
