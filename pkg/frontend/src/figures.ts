/**
 * Figure renderers for the four artifact kinds: partition-map and
 * level-contour from a 2-D partition-tree JSON, gamma-curve from a level
 * sweep CSV, erg-timeseries from a governor trajectory CSV. Every renderer
 * is a pure function from input text to SVG text.
 */

import { FigureError, Table, column, columnsStartingWith, parseCsv } from "./csv.js";
import { Halfspace2, Pt, isoSegment, polygonArea, regionPolygon } from "./geometry.js";
import { Frame, Svg, frame, paletteColor, sx, sy } from "./svg.js";

const BOX = { left: 60, right: 600, top: 30, bottom: 420 };

interface TreeLeaf {
  halfspaces: Halfspace2[];
  C: [number, number];
  d: number;
  vLower: number;
  vUpper: number;
}

interface Tree2d {
  bounds: [Pt, Pt];
  leaves: TreeLeaf[];
}

export function parseTree(text: string): Tree2d {
  const doc = JSON.parse(text);
  if (doc.dim !== 2) {
    throw new FigureError(`partition drawing needs a 2-D tree, got dim ${doc.dim}`);
  }
  const lo: Pt = [-Infinity, -Infinity];
  const hi: Pt = [Infinity, Infinity];
  for (const hs of doc.domain.halfspaces) {
    const [a, b] = hs.normal;
    if (a !== 0 && b === 0) {
      if (a > 0) hi[0] = Math.min(hi[0], hs.offset / a);
      else lo[0] = Math.max(lo[0], hs.offset / a);
    } else if (a === 0 && b !== 0) {
      if (b > 0) hi[1] = Math.min(hi[1], hs.offset / b);
      else lo[1] = Math.max(lo[1], hs.offset / b);
    }
  }
  if (!lo.every(Number.isFinite) || !hi.every(Number.isFinite)) {
    throw new FigureError("tree domain is not a bounded box");
  }
  const leaves: TreeLeaf[] = [];
  for (const node of doc.nodes) {
    if (!node.piece) continue;
    leaves.push({
      halfspaces: node.region.halfspaces.map((h: any) => ({
        normal: [h.normal[0], h.normal[1]],
        offset: h.offset,
      })),
      C: [node.piece.C[0], node.piece.C[1]],
      d: node.piece.d,
      vLower: node.v_lower ?? 0,
      vUpper: node.v_upper ?? 0,
    });
  }
  if (leaves.length === 0) {
    throw new FigureError("tree has no leaves");
  }
  return { bounds: [lo, hi], leaves };
}

export function renderPartitionMap(treeText: string): string {
  const tree = parseTree(treeText);
  const [lo, hi] = tree.bounds;
  const f = frame(lo[0], hi[0], lo[1], hi[1], BOX);
  const svg = new Svg();
  tree.leaves.forEach((leaf, i) => {
    const poly = regionPolygon(tree.bounds, leaf.halfspaces);
    if (poly.length < 3 || polygonArea(poly) < 1e-12) return;
    svg.polygon(poly.map(([x, y]) => [sx(f, x), sy(f, y)]),
                paletteColor(i), "#444444", 0.6);
  });
  svg.axes(f, "x1", "x2");
  svg.text((BOX.left + BOX.right) / 2, 18,
           `linear regions (${tree.leaves.length})`);
  return svg.render();
}

export function renderLevelContour(treeText: string, levels?: number[],
                                   boldLevel?: number): string {
  const tree = parseTree(treeText);
  const [lo, hi] = tree.bounds;
  const vMax = Math.max(...tree.leaves.map((l) => l.vUpper));
  const ls = levels && levels.length
    ? levels
    : [0.1, 0.25, 0.45, 0.7].map((t) => t * vMax);
  const f = frame(lo[0], hi[0], lo[1], hi[1], BOX);
  const svg = new Svg();
  ls.forEach((level, k) => {
    for (const leaf of tree.leaves) {
      const seg = isoSegment(leaf.C, leaf.d, level, leaf.halfspaces, tree.bounds);
      if (!seg) continue;
      svg.polyline(seg.map(([x, y]): Pt => [sx(f, x), sy(f, y)]),
                   paletteColor(6 + k), 1.2);
    }
  });
  if (boldLevel !== undefined) {
    for (const leaf of tree.leaves) {
      const seg = isoSegment(leaf.C, leaf.d, boldLevel, leaf.halfspaces, tree.bounds);
      if (!seg) continue;
      svg.polyline(seg.map(([x, y]): Pt => [sx(f, x), sy(f, y)]), "#000000", 2.5);
    }
  }
  svg.axes(f, "x1", "x2");
  svg.text((BOX.left + BOX.right) / 2, 18, "Lyapunov level sets");
  return svg.render();
}

export function renderGammaCurve(csvText: string): string {
  const table = parseCsv(csvText);
  const r = column(table, "r");
  const gamma = column(table, "gamma");
  const f = frame(Math.min(...r), Math.max(...r), 0, Math.max(...gamma), BOX);
  const svg = new Svg();
  svg.polyline(r.map((v, i): Pt => [sx(f, v), sy(f, gamma[i])]), "#1f78b4", 2);
  svg.axes(f, "reference r", "level");
  svg.text((BOX.left + BOX.right) / 2, 18, "maximal admissible level vs reference");
  return svg.render();
}

function panel(svg: Svg, f: Frame, t: number[], series: { y: number[]; color: string; dash?: string }[],
               label: string): void {
  for (const s of series) {
    svg.polyline(t.map((v, i): Pt => [sx(f, v), sy(f, s.y[i])]), s.color, 1.4,
                 s.dash ?? "");
  }
  svg.line(f.left, f.bottom, f.right, f.bottom, "black");
  svg.line(f.left, f.bottom, f.left, f.top, "black");
  const yv = [f.y0, (f.y0 + f.y1) / 2, f.y1];
  for (const v of yv) {
    svg.text(f.left - 6, sy(f, v) + 3, v.toPrecision(3), "end", 9);
  }
  svg.text(f.left + 8, f.top + 10, label, "start");
}

export function renderErgTimeseries(csvText: string): string {
  const table = parseCsv(csvText);
  const t = column(table, "t");
  const x0 = column(table, "x0");
  const v = column(table, "v");
  const delta = column(table, "Delta");
  const cons = columnsStartingWith(table, "c_");
  if (cons.length === 0) {
    throw new FigureError("missing constraint columns (c_*)");
  }
  const hasX1 = table.columns.includes("x1");
  const x1 = hasX1 ? column(table, "x1") : null;

  const svg = new Svg(640, 640);
  const tMin = Math.min(...t);
  const tMax = Math.max(...t);
  const boxes = [
    { left: 60, right: 600, top: 30, bottom: 200 },
    { left: 60, right: 600, top: 230, bottom: 400 },
    { left: 60, right: 600, top: 430, bottom: 600 },
  ];

  const f1 = frame(tMin, tMax, Math.min(...x0, ...v) - 0.05,
                   Math.max(...x0, ...v) + 0.05, boxes[0]);
  panel(svg, f1, t, [
    { y: x0, color: "#1f78b4" },
    { y: v, color: "#33a02c", dash: "5,3" },
  ], "position and applied reference");

  if (x1) {
    const f2 = frame(tMin, tMax, Math.min(...x1) - 0.05, Math.max(...x1) + 0.05,
                     boxes[1]);
    panel(svg, f2, t, [{ y: x1, color: "#e31a1c" }], "velocity");
  }

  const f3 = frame(tMin, tMax, 0, Math.max(...delta) + 1e-6, boxes[2]);
  panel(svg, f3, t, [{ y: delta, color: "#6a3d9a" }], "dynamic safety margin");
  svg.line(f3.left, sy(f3, 0), f3.right, sy(f3, 0), "#888888", 0.8, "2,2");

  for (const v2 of [tMin, (tMin + tMax) / 2, tMax]) {
    svg.text(sx(f3, v2), boxes[2].bottom + 16, v2.toPrecision(3));
  }
  svg.text(330, 630, "time [s]");
  return svg.render();
}
