#!/usr/bin/env node
/**
 * ekp-plot <kind> <input> <output.svg>
 *
 * kinds: energy (simulate CSV), weak-strong (monitor CSV),
 *        margin-hist (subsolution-check JSON), whitney (whitney JSON).
 *
 * Deterministic output: the same input renders to byte-identical SVG.
 * Exit 1 on schema mismatch (message names the missing column), 2 on usage.
 */

import { readFileSync, writeFileSync } from "fs";

import { KINDS, Kind, renderEnergy, renderMarginHist, renderWeakStrong, renderWhitney } from "./charts";
import { SchemaError, parseCsv } from "./csv";

export function renderFile(kind: string, inputPath: string): string {
  if (!(KINDS as readonly string[]).includes(kind)) {
    throw new RangeError(`unknown figure kind '${kind}' (expected ${KINDS.join(", ")})`);
  }
  const text = readFileSync(inputPath, "utf-8");
  switch (kind as Kind) {
    case "energy":
      return renderEnergy(parseCsv(text));
    case "weak-strong":
      return renderWeakStrong(parseCsv(text));
    case "margin-hist":
      return renderMarginHist(JSON.parse(text));
    case "whitney":
      return renderWhitney(JSON.parse(text));
  }
}

export function main(argv: string[]): number {
  if (argv.length !== 3) {
    process.stderr.write("usage: ekp-plot <kind> <input> <output.svg>\n");
    return 2;
  }
  const [kind, input, output] = argv;
  try {
    const svg = renderFile(kind, input);
    writeFileSync(output, svg);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`ekp-plot: ${err.message}\n`);
      return 1;
    }
    if (err instanceof RangeError) {
      process.stderr.write(`ekp-plot: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
