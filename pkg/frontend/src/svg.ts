/**
 * Minimal deterministic SVG chart primitives. Identical inputs produce a
 * byte-identical document, which is what the golden-image tests pin.
 */

export const STYLE_VERSION = "1";

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 720,
  height: 420,
  margin: { top: 36, right: 24, bottom: 46, left: 58 },
};

export class LinearScale {
  constructor(
    readonly d0: number, readonly d1: number,
    readonly r0: number, readonly r1: number,
  ) {}

  map(x: number): number {
    if (this.d1 === this.d0) {
      return (this.r0 + this.r1) / 2;
    }
    return this.r0 + ((x - this.d0) / (this.d1 - this.d0)) * (this.r1 - this.r0);
  }

  ticks(count = 6): number[] {
    const span = this.d1 - this.d0;
    if (span <= 0) return [this.d0];
    const step = niceStep(span / count);
    const start = Math.ceil(this.d0 / step) * step;
    const out: number[] = [];
    for (let v = start; v <= this.d1 + 1e-9; v += step) {
      out.push(Number(v.toFixed(9)));
    }
    return out;
  }
}

function niceStep(raw: number): number {
  const pow = Math.pow(10, Math.floor(Math.log10(raw)));
  const frac = raw / pow;
  if (frac <= 1) return pow;
  if (frac <= 2) return 2 * pow;
  if (frac <= 5) return 5 * pow;
  return 10 * pow;
}

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  const rounded = Number(x.toFixed(2));
  return Object.is(rounded, -0) ? "0" : String(rounded);
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(readonly frame: Frame) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" ` +
      `height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}" ` +
      `data-style-version="${STYLE_VERSION}">`,
      `<rect width="${frame.width}" height="${frame.height}" fill="white"/>`,
    );
  }

  plotArea(): { x0: number; x1: number; y0: number; y1: number } {
    const { width, height, margin } = this.frame;
    return {
      x0: margin.left,
      x1: width - margin.right,
      y0: height - margin.bottom, // SVG y grows downward; y0 is the axis line
      y1: margin.top,
    };
  }

  title(text: string): void {
    this.parts.push(
      `<text x="${this.frame.width / 2}" y="20" text-anchor="middle" ` +
      `font-family="sans-serif" font-size="14">${escapeXml(text)}</text>`,
    );
  }

  axes(xScale: LinearScale, yScale: LinearScale, xLabel: string, yLabel: string): void {
    const a = this.plotArea();
    this.parts.push(
      `<line x1="${a.x0}" y1="${a.y0}" x2="${a.x1}" y2="${a.y0}" stroke="black"/>`,
      `<line x1="${a.x0}" y1="${a.y0}" x2="${a.x0}" y2="${a.y1}" stroke="black"/>`,
    );
    for (const t of xScale.ticks()) {
      const x = fmt(xScale.map(t));
      this.parts.push(
        `<line x1="${x}" y1="${a.y0}" x2="${x}" y2="${a.y0 + 4}" stroke="black"/>`,
        `<text x="${x}" y="${a.y0 + 18}" text-anchor="middle" ` +
        `font-family="sans-serif" font-size="10">${fmt(t)}</text>`,
      );
    }
    for (const t of yScale.ticks()) {
      const y = fmt(yScale.map(t));
      this.parts.push(
        `<line x1="${a.x0 - 4}" y1="${y}" x2="${a.x0}" y2="${y}" stroke="black"/>`,
        `<text x="${a.x0 - 8}" y="${y}" text-anchor="end" dominant-baseline="middle" ` +
        `font-family="sans-serif" font-size="10">${fmt(t)}</text>`,
      );
    }
    this.parts.push(
      `<text x="${(a.x0 + a.x1) / 2}" y="${a.y0 + 36}" text-anchor="middle" ` +
      `font-family="sans-serif" font-size="12">${escapeXml(xLabel)}</text>`,
      `<text x="16" y="${(a.y0 + a.y1) / 2}" text-anchor="middle" ` +
      `font-family="sans-serif" font-size="12" ` +
      `transform="rotate(-90 16 ${(a.y0 + a.y1) / 2})">${escapeXml(yLabel)}</text>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width: number): void {
    if (points.length === 0) return;
    const attr = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${attr}" fill="none" stroke="${stroke}" ` +
      `stroke-width="${fmt(width)}"/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string, stroke: string): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
      `fill="${fill}" stroke="${stroke}"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
      `stroke="${stroke}" stroke-width="${fmt(width)}"/>`,
    );
  }

  label(x: number, y: number, text: string, size = 10, anchor = "middle"): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" ` +
      `font-family="sans-serif" font-size="${size}">${escapeXml(text)}</text>`,
    );
  }

  legend(entries: Array<{ label: string; color: string }>): void {
    const a = this.plotArea();
    let y = a.y1 + 6;
    for (const { label, color } of entries) {
      this.parts.push(
        `<line x1="${a.x1 - 110}" y1="${y}" x2="${a.x1 - 86}" y2="${y}" ` +
        `stroke="${color}" stroke-width="2"/>`,
        `<text x="${a.x1 - 80}" y="${y + 3}" font-family="sans-serif" ` +
        `font-size="10">${escapeXml(label)}</text>`,
      );
      y += 14;
    }
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
