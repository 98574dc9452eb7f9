// Waypoint sampling with the exact semantics of the headless runner, so a
// pointer script replayed through the bridge reproduces a scripted run.

export type Waypoint = number[]; // [t, x, y] or [t, x, y, theta]

/** Shortest-arc wrap of an angle difference into [-180, 180). */
export function wrapAngle(deg: number): number {
  let r = (((deg + 180) % 360) + 360) % 360;
  if (r >= 360) r = 0;
  return r - 180;
}

/**
 * Piecewise-linear sample, clamping outside the time range. Duplicate
 * times encode a step change taking effect exactly at that time. Mirrors
 * the runner's interpolation bit for bit (same double arithmetic).
 */
export function sampleWaypoints(points: Waypoint[], t: number): number[] {
  if (points.length === 0) throw new Error("empty waypoint list");
  const first = points[0];
  const last = points[points.length - 1];
  if (t <= first[0]) return first.slice(1);
  if (t >= last[0]) return last.slice(1);
  let i = 0;
  while (i + 1 < points.length && points[i + 1][0] <= t + 1e-9) i += 1;
  const a = points[i];
  const b = points[i + 1];
  let u = (t - a[0]) / (b[0] - a[0]);
  u = Math.min(Math.max(u, 0), 1);
  const out = [a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])];
  if (a.length >= 4) out.push(a[3] + u * wrapAngle(b[3] - a[3]));
  return out;
}

/** Deterministic cadence boundary detector matching the runner's streams. */
export class StreamClock {
  private nextDue = 0;
  constructor(private readonly period: number) {}

  fire(t: number): boolean {
    if (t + 1e-9 < this.nextDue) return false;
    while (this.nextDue <= t + 1e-9) this.nextDue += this.period;
    return true;
  }
}
