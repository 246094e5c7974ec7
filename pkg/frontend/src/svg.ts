/**
 * Deterministic SVG assembly: fixed canvas, default fonts, no timestamps,
 * coordinates rounded to a fixed number of decimals so identical inputs
 * yield byte-identical files.
 */

export const WIDTH = 800;
export const HEIGHT = 500;
export const MARGIN = { left: 70, right: 20, top: 40, bottom: 50 };

export function fmtCoord(v: number): string {
  return v.toFixed(3);
}

/** Shortest round-trip decimal of the value, used for audit labels. */
export function fmtExact(v: number): string {
  return String(v);
}

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e-3 && a < 1e4) return v.toPrecision(4).replace(/\.?0+$/, "");
  return v.toExponential(2);
}

export interface Scale {
  toPx(v: number): number;
}

export function linearScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  const span = hi - lo === 0 ? 1 : hi - lo;
  return {
    toPx: (v: number) => pxLo + ((v - lo) / span) * (pxHi - pxLo),
  };
}

export class SvgBuilder {
  private parts: string[] = [];

  constructor(title: string) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`
    );
    this.parts.push(`<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
    this.parts.push(
      `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="16">${escapeXml(title)}</text>`
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash?: string): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmtCoord(x1)}" y1="${fmtCoord(y1)}" x2="${fmtCoord(x2)}" y2="${fmtCoord(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5): void {
    const pts = points.map(([x, y]) => `${fmtCoord(x)},${fmtCoord(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"/>`
    );
  }

  polygon(points: Array<[number, number]>, fill: string, opacity = 0.25): void {
    const pts = points.map(([x, y]) => `${fmtCoord(x)},${fmtCoord(y)}`).join(" ");
    this.parts.push(`<polygon points="${pts}" fill="${fill}" fill-opacity="${opacity}" stroke="none"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, stroke = "none", opacity = 1): void {
    this.parts.push(
      `<rect x="${fmtCoord(x)}" y="${fmtCoord(y)}" width="${fmtCoord(w)}" height="${fmtCoord(h)}" fill="${fill}" fill-opacity="${opacity}" stroke="${stroke}"/>`
    );
  }

  text(x: number, y: number, content: string, anchor = "start", size = 12, extra = ""): void {
    this.parts.push(
      `<text x="${fmtCoord(x)}" y="${fmtCoord(y)}" text-anchor="${anchor}" font-size="${size}"${extra}>${escapeXml(content)}</text>`
    );
  }

  /** Invisible audit label carrying a series extremum exactly. */
  extremum(series: string, kind: "min" | "max", value: number): void {
    this.parts.push(
      `<text class="extremum" data-series="${series}" data-kind="${kind}" x="0" y="0" font-size="0">${fmtExact(value)}</text>`
    );
  }

  axes(xLo: number, xHi: number, yLo: number, yHi: number, xLabel: string, yLabel: string): {
    x: Scale;
    y: Scale;
  } {
    const x = linearScale(xLo, xHi, MARGIN.left, WIDTH - MARGIN.right);
    const y = linearScale(yLo, yHi, HEIGHT - MARGIN.bottom, MARGIN.top);
    this.line(MARGIN.left, HEIGHT - MARGIN.bottom, WIDTH - MARGIN.right, HEIGHT - MARGIN.bottom, "black");
    this.line(MARGIN.left, MARGIN.top, MARGIN.left, HEIGHT - MARGIN.bottom, "black");
    const ticks = 5;
    for (let i = 0; i <= ticks; i++) {
      const xv = xLo + ((xHi - xLo) * i) / ticks;
      const yv = yLo + ((yHi - yLo) * i) / ticks;
      const px = x.toPx(xv);
      const py = y.toPx(yv);
      this.line(px, HEIGHT - MARGIN.bottom, px, HEIGHT - MARGIN.bottom + 5, "black");
      this.text(px, HEIGHT - MARGIN.bottom + 18, fmtTick(xv), "middle", 10);
      this.line(MARGIN.left - 5, py, MARGIN.left, py, "black");
      this.text(MARGIN.left - 8, py + 3, fmtTick(yv), "end", 10);
    }
    this.text(WIDTH / 2, HEIGHT - 12, xLabel, "middle", 12);
    this.text(16, HEIGHT / 2, yLabel, "middle", 12, ` transform="rotate(-90 16 ${HEIGHT / 2})"`);
    return { x, y };
  }

  legend(entries: Array<[string, string]>): void {
    let ypos = MARGIN.top + 8;
    for (const [label, color] of entries) {
      this.line(WIDTH - MARGIN.right - 150, ypos, WIDTH - MARGIN.right - 120, ypos, color, 3);
      this.text(WIDTH - MARGIN.right - 112, ypos + 4, label, "start", 11);
      ypos += 18;
    }
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
