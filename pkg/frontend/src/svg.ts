/** Minimal deterministic SVG assembly: axes, polylines, annotations. */

export interface Extent {
  min: number;
  max: number;
}

export function extent(values: number[], padFrac = 0.06): Extent {
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (!Number.isFinite(min) || !Number.isFinite(max)) {
    throw new Error("non-finite data extent");
  }
  if (min === max) {
    min -= 1;
    max += 1;
  }
  const pad = (max - min) * padFrac;
  return { min: min - pad, max: max + pad };
}

export class Panel {
  readonly parts: string[] = [];

  constructor(
    readonly x0: number,
    readonly y0: number,
    readonly width: number,
    readonly height: number,
    readonly xext: Extent,
    readonly yext: Extent,
    readonly logX = false,
    readonly logY = false,
  ) {}

  private tx(x: number): number {
    const v = this.logX ? Math.log10(x) : x;
    const a = this.logX ? Math.log10(this.xext.min) : this.xext.min;
    const b = this.logX ? Math.log10(this.xext.max) : this.xext.max;
    return this.x0 + ((v - a) / (b - a)) * this.width;
  }

  private ty(y: number): number {
    const v = this.logY ? Math.log10(y) : y;
    const a = this.logY ? Math.log10(this.yext.min) : this.yext.min;
    const b = this.logY ? Math.log10(this.yext.max) : this.yext.max;
    return this.y0 + this.height - ((v - a) / (b - a)) * this.height;
  }

  frame(title: string, xlabel: string, ylabel: string): void {
    this.parts.push(
      `<rect x="${this.x0}" y="${this.y0}" width="${this.width}" height="${this.height}" ` +
        `fill="none" stroke="#444" stroke-width="1"/>`,
      `<text x="${this.x0 + this.width / 2}" y="${this.y0 - 8}" text-anchor="middle" ` +
        `font-size="13" font-family="sans-serif">${title}</text>`,
      `<text x="${this.x0 + this.width / 2}" y="${this.y0 + this.height + 28}" ` +
        `text-anchor="middle" font-size="11" font-family="sans-serif">${xlabel}</text>`,
      `<text x="${this.x0 - 34}" y="${this.y0 + this.height / 2}" text-anchor="middle" ` +
        `font-size="11" font-family="sans-serif" transform="rotate(-90 ${this.x0 - 34} ` +
        `${this.y0 + this.height / 2})">${ylabel}</text>`,
    );
  }

  polyline(xs: number[], ys: number[], color: string, width = 1.5, dash = ""): void {
    const pts = xs.map((x, i) => `${this.tx(x).toFixed(2)},${this.ty(ys[i]).toFixed(2)}`);
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" ` +
        `stroke-width="${width}"${dashAttr}/>`,
    );
  }

  dots(xs: number[], ys: number[], color: string, radius = 2.6): void {
    for (let i = 0; i < xs.length; i++) {
      this.parts.push(
        `<circle cx="${this.tx(xs[i]).toFixed(2)}" cy="${this.ty(ys[i]).toFixed(2)}" ` +
          `r="${radius}" fill="${color}"/>`,
      );
    }
  }

  hline(y: number, color: string, dash = "4 3"): void {
    this.parts.push(
      `<line x1="${this.x0}" y1="${this.ty(y).toFixed(2)}" x2="${this.x0 + this.width}" ` +
        `y2="${this.ty(y).toFixed(2)}" stroke="${color}" stroke-dasharray="${dash}"/>`,
    );
  }

  note(text: string, line = 0, color = "#222"): void {
    this.parts.push(
      `<text x="${this.x0 + 8}" y="${this.y0 + 16 + 14 * line}" font-size="11" ` +
        `font-family="monospace" fill="${color}">${text}</text>`,
    );
  }

  ticks(nx = 4, ny = 4): void {
    for (let i = 0; i <= nx; i++) {
      const frac = i / nx;
      const xval = this.logX
        ? Math.pow(10, Math.log10(this.xext.min) + frac * (Math.log10(this.xext.max) - Math.log10(this.xext.min)))
        : this.xext.min + frac * (this.xext.max - this.xext.min);
      const px = this.x0 + frac * this.width;
      this.parts.push(
        `<line x1="${px}" y1="${this.y0 + this.height}" x2="${px}" y2="${this.y0 + this.height + 4}" stroke="#444"/>`,
        `<text x="${px}" y="${this.y0 + this.height + 16}" text-anchor="middle" font-size="9" ` +
          `font-family="monospace">${formatTick(xval)}</text>`,
      );
    }
    for (let i = 0; i <= ny; i++) {
      const frac = i / ny;
      const yval = this.logY
        ? Math.pow(10, Math.log10(this.yext.min) + frac * (Math.log10(this.yext.max) - Math.log10(this.yext.min)))
        : this.yext.min + frac * (this.yext.max - this.yext.min);
      const py = this.y0 + this.height - frac * this.height;
      this.parts.push(
        `<line x1="${this.x0 - 4}" y1="${py}" x2="${this.x0}" y2="${py}" stroke="#444"/>`,
        `<text x="${this.x0 - 7}" y="${py + 3}" text-anchor="end" font-size="9" ` +
          `font-family="monospace">${formatTick(yval)}</text>`,
      );
    }
  }
}

export function formatTick(value: number): string {
  if (value === 0) return "0";
  const mag = Math.abs(value);
  if (mag >= 1e4 || mag < 1e-2) return value.toExponential(1);
  return Number(value.toPrecision(3)).toString();
}

export function document(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    ...body,
    "</svg>",
  ].join("\n");
}
