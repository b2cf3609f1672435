#!/usr/bin/env node
/**
 * plots render <figure-spec.json>
 *
 * Reads a figure specification, renders the referenced harness artifact
 * to a static SVG and prints the output path.  Schema mismatches and
 * missing files exit nonzero with the offending key.
 */

import { renderToFile } from "./render.js";

export function main(argv: string[]): number {
  if (argv.length !== 2 || argv[0] !== "render") {
    process.stderr.write("usage: plots render <figure-spec.json>\n");
    return 2;
  }
  try {
    const out = renderToFile(argv[1]);
    process.stdout.write(`${out}\n`);
    return 0;
  } catch (err) {
    const msg = err instanceof Error ? err.message : String(err);
    process.stderr.write(`plots: ${msg}\n`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("cli.ts")) {
  process.exit(main(process.argv.slice(2)));
}
