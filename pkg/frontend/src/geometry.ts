/**
 * Tiny 2-D polygon helpers for drawing halfspace regions: clip a convex
 * polygon by a halfspace (Sutherland-Hodgman step) and clip a line to a
 * convex region given by halfspaces.
 */

export type Pt = [number, number];

export interface Halfspace2 {
  normal: [number, number];
  offset: number; // normal . x <= offset
}

export function clipPolygon(poly: Pt[], hs: Halfspace2): Pt[] {
  const out: Pt[] = [];
  const n = poly.length;
  const side = (p: Pt) => hs.normal[0] * p[0] + hs.normal[1] * p[1] - hs.offset;
  for (let i = 0; i < n; i++) {
    const a = poly[i];
    const b = poly[(i + 1) % n];
    const sa = side(a);
    const sb = side(b);
    if (sa <= 0) out.push(a);
    if ((sa < 0 && sb > 0) || (sa > 0 && sb < 0)) {
      const t = sa / (sa - sb);
      out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
  }
  return out;
}

export function regionPolygon(bounds: [Pt, Pt], halfspaces: Halfspace2[]): Pt[] {
  const [[x0, y0], [x1, y1]] = bounds;
  let poly: Pt[] = [
    [x0, y0],
    [x1, y0],
    [x1, y1],
    [x0, y1],
  ];
  for (const hs of halfspaces) {
    poly = clipPolygon(poly, hs);
    if (poly.length === 0) return poly;
  }
  return poly;
}

export function polygonArea(poly: Pt[]): number {
  let area = 0;
  for (let i = 0; i < poly.length; i++) {
    const [xa, ya] = poly[i];
    const [xb, yb] = poly[(i + 1) % poly.length];
    area += xa * yb - xb * ya;
  }
  return Math.abs(area) / 2;
}

/**
 * Segment of the line {c . y + d = level} inside a convex region, or null.
 * Parameterizes the line and intersects the parameter interval with every
 * halfspace.
 */
export function isoSegment(
  c: [number, number],
  d: number,
  level: number,
  halfspaces: Halfspace2[],
  bounds: [Pt, Pt],
): [Pt, Pt] | null {
  const nrm = Math.hypot(c[0], c[1]);
  if (nrm < 1e-12) return null;
  // point on the line closest to the origin, direction along the line
  const k = (level - d) / (nrm * nrm);
  const p0: Pt = [c[0] * k, c[1] * k];
  const dir: Pt = [-c[1] / nrm, c[0] / nrm];
  let tLo = -1e9;
  let tHi = 1e9;
  const all = halfspaces.concat([
    { normal: [1, 0], offset: bounds[1][0] },
    { normal: [-1, 0], offset: -bounds[0][0] },
    { normal: [0, 1], offset: bounds[1][1] },
    { normal: [0, -1], offset: -bounds[0][1] },
  ]);
  for (const hs of all) {
    const a = hs.normal[0] * dir[0] + hs.normal[1] * dir[1];
    const b = hs.offset - (hs.normal[0] * p0[0] + hs.normal[1] * p0[1]);
    if (Math.abs(a) < 1e-14) {
      if (b < 0) return null;
      continue;
    }
    const t = b / a;
    if (a > 0) tHi = Math.min(tHi, t);
    else tLo = Math.max(tLo, t);
  }
  if (tLo >= tHi - 1e-12) return null;
  return [
    [p0[0] + tLo * dir[0], p0[1] + tLo * dir[1]],
    [p0[0] + tHi * dir[0], p0[1] + tHi * dir[1]],
  ];
}
