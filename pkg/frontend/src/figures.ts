/**
 * The four figure kinds: reputation-scaled dissemination and confirmation
 * rates, honest tip counts, and confirmation latency distributions overlaid
 * across scenarios. Line colour encodes node mode, line thickness encodes
 * reputation.
 */

import * as path from "node:path";

import { SchemaError, loadLatency, loadRates, loadTips, nodeInfo } from "./schema.js";
import { DEFAULT_FRAME, LinearScale, SvgDoc } from "./svg.js";

export const FIGURE_KINDS = ["scaled_dr", "scaled_cr", "tips", "latency"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export const MODE_COLORS: Record<string, string> = {
  best_effort: "#d62728", // red
  content: "#1f77b4",     // blue
  inactive: "#7f7f7f",    // gray
  spammer: "#2ca02c",     // malicious green
  multirate: "#2ca02c",
};

export function modeColor(mode: string): string {
  const kind = mode.split(":")[0];
  return MODE_COLORS[kind] ?? "#000000";
}

export function repWidth(rep: number, maxRep: number): number {
  return 0.8 + 2.4 * (rep / maxRep);
}

function ratesFigure(runDir: string, column: "drScaled" | "crScaled",
                     title: string): string {
  const rates = loadRates(runDir);
  if (rates.length === 0) {
    throw new SchemaError(`${runDir}: rates.csv has no data rows`);
  }
  const nodes = nodeInfo(rates);
  const maxRep = Math.max(...nodes.map((n) => n.rep));
  const times = rates.map((r) => r.time);
  const values = rates.map((r) => r[column]);
  const doc = new SvgDoc(DEFAULT_FRAME);
  const a = doc.plotArea();
  const x = new LinearScale(Math.min(...times), Math.max(...times), a.x0, a.x1);
  const y = new LinearScale(0, Math.max(...values, 1e-9), a.y0, a.y1);
  doc.title(title);
  doc.axes(x, y, "time (s)", title);
  for (const info of nodes) {
    const pts: Array<[number, number]> = rates
      .filter((r) => r.node === info.node)
      .map((r) => [x.map(r.time), y.map(r[column])]);
    doc.polyline(pts, modeColor(info.mode), repWidth(info.rep, maxRep));
  }
  doc.legend(uniqueModes(nodes.map((n) => n.mode)));
  return doc.render();
}

function tipsFigure(runDir: string): string {
  const tips = loadTips(runDir);
  if (tips.length === 0) {
    throw new SchemaError(`${runDir}: tips.csv has no data rows`);
  }
  const style = new Map(nodeInfo(loadRates(runDir)).map((n) => [n.node, n]));
  const maxRep = Math.max(...[...style.values()].map((n) => n.rep));
  const doc = new SvgDoc(DEFAULT_FRAME);
  const a = doc.plotArea();
  const x = new LinearScale(Math.min(...tips.map((t) => t.time)),
                            Math.max(...tips.map((t) => t.time)), a.x0, a.x1);
  const y = new LinearScale(0, Math.max(...tips.map((t) => t.tipCount), 1), a.y0, a.y1);
  doc.title("honest tip pool size");
  doc.axes(x, y, "time (s)", "tips");
  const nodes = [...new Set(tips.map((t) => t.node))].sort((p, q) => p - q);
  for (const node of nodes) {
    const info = style.get(node);
    const pts: Array<[number, number]> = tips
      .filter((t) => t.node === node)
      .map((t) => [x.map(t.time), y.map(t.tipCount)]);
    doc.polyline(pts, modeColor(info?.mode ?? ""), repWidth(info?.rep ?? 1, maxRep));
  }
  return doc.render();
}

function quantile(sorted: number[], q: number): number {
  const pos = (sorted.length - 1) * q;
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
}

function latencyFigure(runDirs: string[]): string {
  const groups = runDirs.map((dir) => {
    const rows = loadLatency(dir);
    if (rows.length === 0) {
      throw new SchemaError(`${dir}: latency.csv has no data rows`);
    }
    return {
      label: path.basename(path.resolve(dir)),
      values: rows.map((r) => r.latency).sort((p, q) => p - q),
    };
  });
  const doc = new SvgDoc(DEFAULT_FRAME);
  const a = doc.plotArea();
  const yMax = Math.max(...groups.flatMap((g) => g.values));
  const y = new LinearScale(0, yMax, a.y0, a.y1);
  const x = new LinearScale(0, groups.length, a.x0, a.x1);
  doc.title("full-confirmation latency by scenario");
  doc.axes(x, y, "", "latency (s)");
  groups.forEach((group, i) => {
    const cx = x.map(i + 0.5);
    const half = (x.map(0.5) - x.map(0.2)) / 2;
    const v = group.values;
    const [q1, q2, q3] = [quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)];
    const [lo, hi] = [v[0], v[v.length - 1]];
    doc.line(cx, y.map(lo), cx, y.map(q1), "black");
    doc.line(cx, y.map(q3), cx, y.map(hi), "black");
    doc.rect(cx - half, y.map(q3), 2 * half, y.map(q1) - y.map(q3),
             "#c6dbef", "black");
    doc.line(cx - half, y.map(q2), cx + half, y.map(q2), "black", 2);
    doc.label(cx, a.y0 + 18, group.label);
    doc.label(cx, y.map(hi) - 6, `max ${hi.toFixed(1)}`, 9);
  });
  return doc.render();
}

function uniqueModes(modes: string[]): Array<{ label: string; color: string }> {
  const seen = new Map<string, string>();
  for (const mode of modes) {
    const kind = mode.split(":")[0];
    if (!seen.has(kind)) {
      seen.set(kind, modeColor(kind));
    }
  }
  return [...seen.entries()].map(([label, color]) => ({ label, color }));
}

export function renderFigure(kind: FigureKind, runDirs: string[]): string {
  if (runDirs.length === 0) {
    throw new SchemaError("no run directories given");
  }
  if (kind !== "latency" && runDirs.length !== 1) {
    throw new SchemaError(`figure kind '${kind}' takes exactly one run directory`);
  }
  switch (kind) {
    case "scaled_dr":
      return ratesFigure(runDirs[0], "drScaled", "reputation-scaled dissemination rate");
    case "scaled_cr":
      return ratesFigure(runDirs[0], "crScaled", "reputation-scaled confirmation rate");
    case "tips":
      return tipsFigure(runDirs[0]);
    case "latency":
      return latencyFigure(runDirs);
  }
}
