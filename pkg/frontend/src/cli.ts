/**
 * plot --kind <scaled_dr|scaled_cr|tips|latency> --runs <dir...> --out <dir>
 *
 * Renders one SVG per invocation from simulator CSV output. Schema problems
 * exit nonzero and name what is missing.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { FIGURE_KINDS, FigureKind, renderFigure } from "./figures.js";
import { SchemaError } from "./schema.js";

interface Args {
  kind: FigureKind;
  runs: string[];
  out: string;
}

export function parseArgs(argv: string[]): Args {
  let kind: string | null = null;
  const runs: string[] = [];
  let out: string | null = null;
  let i = 0;
  while (i < argv.length) {
    const arg = argv[i];
    if (arg === "--kind") {
      kind = argv[++i];
    } else if (arg === "--runs") {
      while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
        runs.push(argv[++i]);
      }
    } else if (arg === "--out") {
      out = argv[++i];
    } else {
      throw new UsageError(`unknown argument: ${arg}`);
    }
    i += 1;
  }
  if (!kind || !(FIGURE_KINDS as readonly string[]).includes(kind)) {
    throw new UsageError(`--kind must be one of ${FIGURE_KINDS.join(", ")}`);
  }
  if (runs.length === 0) {
    throw new UsageError("--runs requires at least one run directory");
  }
  if (!out) {
    throw new UsageError("--out is required");
  }
  return { kind: kind as FigureKind, runs, out };
}

export class UsageError extends Error {}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    throw err;
  }
  try {
    const svg = renderFigure(args.kind, args.runs);
    fs.mkdirSync(args.out, { recursive: true });
    const file = path.join(args.out, `${args.kind}.svg`);
    fs.writeFileSync(file, svg);
    console.log(`wrote ${file}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`input error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly = process.argv[1] !== undefined &&
  path.resolve(process.argv[1]) === new URL(import.meta.url).pathname;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
