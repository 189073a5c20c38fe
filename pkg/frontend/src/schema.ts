/**
 * CSV schemas written by the simulator, plus strict loading.
 *
 * Column sets and their order are fixed; a mismatch is a hard error that
 * names the offending column so batch jobs fail loudly instead of plotting
 * nonsense.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export const RATES_COLUMNS = [
  "time", "node", "mode", "rep", "dr", "cr", "dr_scaled", "cr_scaled",
] as const;
export const TIPS_COLUMNS = ["time", "node", "tip_count"] as const;
export const LATENCY_COLUMNS = [
  "block", "issuer", "issue_time", "full_confirm_time", "latency",
] as const;

export class SchemaError extends Error {}

export interface RatesRow {
  time: number;
  node: number;
  mode: string;
  rep: number;
  dr: number;
  cr: number;
  drScaled: number;
  crScaled: number;
}

export interface TipsRow {
  time: number;
  node: number;
  tipCount: number;
}

export interface LatencyRow {
  block: number;
  issuer: number;
  latency: number;
}

function readTable(file: string, expected: readonly string[]): string[][] {
  if (!fs.existsSync(file)) {
    throw new SchemaError(`missing input file: ${file}`);
  }
  const lines = fs.readFileSync(file, "utf8").split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`empty input file: ${file}`);
  }
  const header = lines[0].split(",");
  for (const column of expected) {
    if (!header.includes(column)) {
      throw new SchemaError(`${file}: missing column '${column}'`);
    }
  }
  for (const column of header) {
    if (!expected.includes(column)) {
      throw new SchemaError(`${file}: unexpected column '${column}'`);
    }
  }
  const index = expected.map((c) => header.indexOf(c));
  return lines.slice(1).map((line) => {
    const cells = line.split(",");
    return index.map((i) => cells[i]);
  });
}

export function loadRates(runDir: string): RatesRow[] {
  return readTable(path.join(runDir, "rates.csv"), RATES_COLUMNS).map((c) => ({
    time: Number(c[0]),
    node: Number(c[1]),
    mode: c[2],
    rep: Number(c[3]),
    dr: Number(c[4]),
    cr: Number(c[5]),
    drScaled: Number(c[6]),
    crScaled: Number(c[7]),
  }));
}

export function loadTips(runDir: string): TipsRow[] {
  return readTable(path.join(runDir, "tips.csv"), TIPS_COLUMNS).map((c) => ({
    time: Number(c[0]),
    node: Number(c[1]),
    tipCount: Number(c[2]),
  }));
}

export function loadLatency(runDir: string): LatencyRow[] {
  return readTable(path.join(runDir, "latency.csv"), LATENCY_COLUMNS).map((c) => ({
    block: Number(c[0]),
    issuer: Number(c[1]),
    latency: Number(c[4]),
  }));
}

/** Per-node display attributes, derived from the rates table. */
export interface NodeStyleInfo {
  node: number;
  mode: string;
  rep: number;
}

export function nodeInfo(rates: RatesRow[]): NodeStyleInfo[] {
  const seen = new Map<number, NodeStyleInfo>();
  for (const row of rates) {
    if (!seen.has(row.node)) {
      seen.set(row.node, { node: row.node, mode: row.mode, rep: row.rep });
    }
  }
  return [...seen.values()].sort((a, b) => a.node - b.node);
}
