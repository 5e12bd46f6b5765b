#!/usr/bin/env node
/** Entry point.
 *
 * Serve a model over the wire protocol:
 *   seqleak-bridge --model table:path.json [--transport stdio|tcp:PORT]
 *                  [--name NAME] [--max-context N]
 *
 * Prepare a scoring dataset from raw text:
 *   seqleak-bridge prepare --text corpus.txt --prefix-len 50 --suffix-len 50 \
 *                          --out records.jsonl [--vocab vocab.json]
 */

import { parseArgs } from "node:util";
import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";
import { loadModel } from "./models.js";
import { prepareDataset, toJsonl } from "./prepare.js";
import { serveStream, serveTcp } from "./server.js";

function fail(msg: string): never {
  process.stderr.write(JSON.stringify({ error: msg }) + "\n");
  process.exit(2);
}

function runServe(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      model: { type: "string" },
      transport: { type: "string", default: "stdio" },
      name: { type: "string" },
      "max-context": { type: "string", default: "4096" },
    },
  });
  if (!values.model) fail("--model is required");
  const maxContext = Number(values["max-context"]);
  if (!Number.isInteger(maxContext) || maxContext < 1) {
    fail(`--max-context must be a positive integer, got ${values["max-context"]}`);
  }
  let model;
  try {
    model = loadModel(values.model);
  } catch (e) {
    fail(`cannot load model: ${(e as Error).message}`);
  }
  const opts = { name: values.name, maxContext };
  const transport = values.transport ?? "stdio";
  if (transport === "stdio") {
    void serveStream(model, process.stdin, process.stdout, opts).then(() => process.exit(0));
  } else if (transport.startsWith("tcp:")) {
    const port = Number(transport.slice(4));
    if (!Number.isInteger(port) || port < 0 || port > 65535) {
      fail(`bad tcp port in ${JSON.stringify(transport)}`);
    }
    const server = serveTcp(model, port, opts);
    server.on("listening", () => {
      const addr = server.address();
      const bound = typeof addr === "object" && addr ? addr.port : port;
      process.stderr.write(JSON.stringify({ listening: bound }) + "\n");
    });
  } else {
    fail(`--transport must be stdio or tcp:PORT, got ${JSON.stringify(transport)}`);
  }
}

function runPrepare(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      text: { type: "string" },
      "prefix-len": { type: "string" },
      "suffix-len": { type: "string" },
      out: { type: "string" },
      vocab: { type: "string" },
    },
  });
  if (!values.text || !values["prefix-len"] || !values["suffix-len"] || !values.out) {
    fail("prepare needs --text, --prefix-len, --suffix-len, --out");
  }
  const prefixLen = Number(values["prefix-len"]);
  const suffixLen = Number(values["suffix-len"]);
  let text: string;
  try {
    text = readFileSync(values.text, "utf8");
  } catch (e) {
    fail(`cannot read ${values.text}: ${(e as Error).message}`);
  }
  let result;
  try {
    result = prepareDataset(text, prefixLen, suffixLen, basename(values.text));
  } catch (e) {
    fail((e as Error).message);
  }
  writeFileSync(values.out, toJsonl(result.records));
  if (values.vocab) {
    writeFileSync(values.vocab, JSON.stringify(result.tokenizer.toJSON(), null, 2) + "\n");
  }
  process.stderr.write(
    JSON.stringify({
      records: result.records.length,
      skipped: result.skipped,
      tokens: result.totalTokens,
      vocab_size: result.tokenizer.vocabSize,
    }) + "\n",
  );
}

const argv = process.argv.slice(2);
try {
  if (argv[0] === "prepare") runPrepare(argv.slice(1));
  else runServe(argv);
} catch (e) {
  fail((e as Error).message);
}
