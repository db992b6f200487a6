#!/usr/bin/env node
// Batch figure generation from the simulation harness's CSV artifacts.
//
//   plots render --kind overlay --in compare_density_*.csv --out fig.svg
//   plots render --kind convergence --in cmp_L16.csv --in cmp_L64.csv --out c.svg
//   plots render --kind residual --in residual.csv --out heat.png
//
// Exit codes: 0 ok, 1 schema/data error, 2 usage error.

import { parseArgs } from "node:util";

import { SchemaError, readCsv } from "./csv.js";
import { FigureKind, renderFigure } from "./figures.js";
import { formatFromPath, writeFigure } from "./render.js";

const USAGE = `usage: plots render --kind overlay|convergence|residual \\
    --in data.csv [--in more.csv ...] [--ref curve.csv] \\
    --out figure.(svg|png) [--format svg|png] [--title text]`;

export async function main(argv: string[]): Promise<number> {
  if (argv[0] !== "render") {
    process.stderr.write(USAGE + "\n");
    return 2;
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: argv.slice(1),
      options: {
        kind: { type: "string" },
        in: { type: "string", multiple: true },
        ref: { type: "string" },
        out: { type: "string" },
        format: { type: "string" },
        title: { type: "string" },
      },
    });
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}\n`);
    return 2;
  }
  const { kind, in: inputs, ref, out, format, title } = parsed.values;
  if (!kind || !inputs || inputs.length === 0 || !out) {
    process.stderr.write(USAGE + "\n");
    return 2;
  }
  if (!["overlay", "convergence", "residual"].includes(kind)) {
    process.stderr.write(`unknown --kind ${kind}\n${USAGE}\n`);
    return 2;
  }
  try {
    const job = {
      kind: kind as FigureKind,
      inputs: inputs.map(readCsv),
      reference: ref ? readCsv(ref) : undefined,
      title,
    };
    const svgText = renderFigure(job);
    await writeFigure(svgText, out, formatFromPath(out, format));
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`schema error: ${err.message}\n`);
      return 1;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
  process.stdout.write(out + "\n");
  return 0;
}

const isMain =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (isMain) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
