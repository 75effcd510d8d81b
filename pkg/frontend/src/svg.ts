/**
 * Minimal deterministic SVG assembly: fixed canvas, fixed fonts, numbers
 * rounded to a fixed precision, no timestamps. Re-rendering the same inputs
 * produces byte-identical files.
 */

export const WIDTH = 640;
export const HEIGHT = 480;

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  const s = v.toPrecision(6);
  return s.includes(".") ? s.replace(/\.?0+$/, "").replace(/\.?0+e/, "e") : s;
}

export interface Frame {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
  left: number;
  right: number;
  top: number;
  bottom: number;
}

export function frame(x0: number, x1: number, y0: number, y1: number,
                      box: { left: number; right: number; top: number; bottom: number }): Frame {
  const padX = (x1 - x0) * 0.05 || 1;
  const padY = (y1 - y0) * 0.05 || 1;
  return { x0: x0 - padX, x1: x1 + padX, y0: y0 - padY, y1: y1 + padY, ...box };
}

export function sx(f: Frame, x: number): number {
  return f.left + ((x - f.x0) / (f.x1 - f.x0)) * (f.right - f.left);
}

export function sy(f: Frame, y: number): number {
  return f.bottom - ((y - f.y0) / (f.y1 - f.y0)) * (f.bottom - f.top);
}

export class Svg {
  private parts: string[] = [];

  constructor(width = WIDTH, height = HEIGHT) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="monospace" font-size="11">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  polygon(pts: [number, number][], fill: string, stroke = "none", width = 0.5): void {
    const d = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polygon points="${d}" fill="${fill}" stroke="${stroke}" stroke-width="${width}"/>`);
  }

  polyline(pts: [number, number][], stroke: string, width = 1.5, dash = ""): void {
    const d = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(`<polyline points="${d}" fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string,
       width = 1, dash = ""): void {
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
      `stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`);
  }

  text(x: number, y: number, s: string, anchor = "middle", size = 11): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" font-size="${size}">${s}</text>`);
  }

  axes(f: Frame, xlabel: string, ylabel: string, ticks = 5): void {
    this.line(f.left, f.bottom, f.right, f.bottom, "black");
    this.line(f.left, f.bottom, f.left, f.top, "black");
    for (let i = 0; i <= ticks; i++) {
      const xv = f.x0 + ((f.x1 - f.x0) * i) / ticks;
      const yv = f.y0 + ((f.y1 - f.y0) * i) / ticks;
      const px = sx(f, xv);
      const py = sy(f, yv);
      this.line(px, f.bottom, px, f.bottom + 4, "black");
      this.text(px, f.bottom + 16, fmt(xv));
      this.line(f.left - 4, py, f.left, py, "black");
      this.text(f.left - 6, py + 3, fmt(yv), "end");
    }
    this.text((f.left + f.right) / 2, f.bottom + 32, xlabel);
    this.text(14, (f.top + f.bottom) / 2, ylabel, "middle");
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

/** Fixed qualitative palette; keyed by index so recoloring is impossible. */
export function paletteColor(i: number): string {
  const palette = [
    "#a6cee3", "#b2df8a", "#fb9a99", "#fdbf6f", "#cab2d6",
    "#ffff99", "#1f78b4", "#33a02c", "#e31a1c", "#ff7f00",
    "#6a3d9a", "#b15928", "#8dd3c7", "#bebada", "#fccde5",
  ];
  return palette[i % palette.length];
}
