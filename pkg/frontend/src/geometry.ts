import { Point } from "./types";

/** Cumulative arc length at every polyline vertex. */
export function arcLengths(poly: Point[]): number[] {
  const s = new Array<number>(poly.length);
  s[0] = 0;
  for (let i = 1; i < poly.length; i++) {
    s[i] = s[i - 1] + Math.hypot(poly[i][0] - poly[i - 1][0], poly[i][1] - poly[i - 1][1]);
  }
  return s;
}

/** Point at arc position `at` along the polyline (clamped to its ends). */
export function pointAt(poly: Point[], s: number[], at: number): Point {
  if (at <= 0) return [poly[0][0], poly[0][1]];
  const total = s[s.length - 1];
  if (at >= total) return [poly[poly.length - 1][0], poly[poly.length - 1][1]];
  // binary search for the containing segment
  let lo = 0;
  let hi = s.length - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (s[mid] <= at) lo = mid;
    else hi = mid;
  }
  const f = (at - s[lo]) / (s[hi] - s[lo]);
  return [
    poly[lo][0] + f * (poly[hi][0] - poly[lo][0]),
    poly[lo][1] + f * (poly[hi][1] - poly[lo][1]),
  ];
}

/** Exhaustive distance from a point to the polyline (display use only: the
 * runner never computes measures, the service owns analytics). */
export function distanceToPolyline(poly: Point[], p: Point): number {
  let best = Infinity;
  for (let i = 0; i < poly.length - 1; i++) {
    const ax = poly[i][0];
    const ay = poly[i][1];
    const dx = poly[i + 1][0] - ax;
    const dy = poly[i + 1][1] - ay;
    const len2 = dx * dx + dy * dy;
    let t = len2 > 0 ? ((p[0] - ax) * dx + (p[1] - ay) * dy) / len2 : 0;
    t = Math.max(0, Math.min(1, t));
    const d = Math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy));
    if (d < best) best = d;
  }
  return best;
}

/** FNV-1a checksum over the exact coordinate bytes; the debug overlay shows
 * it so operators can confirm the rendered tunnel is the served polyline. */
export function polylineChecksum(poly: Point[]): string {
  let h = 0x811c9dc5;
  const text = poly.map(([x, y]) => `${x},${y}`).join(";");
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h.toString(16).padStart(8, "0");
}
