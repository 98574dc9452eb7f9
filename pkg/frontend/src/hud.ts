// HUD state: link parameter sliders and live readouts. Slider values are
// clamped to the configured bounds client-side; the server echoes what it
// actually applied, and a mismatch shows a clamp indication.

import type { LinkParams, SetLinkParamsMessage, SnapshotStats } from "./types.js";

export const LINK_BOUNDS = {
  latency_ms: { min: 0, max: 2000 },
  jitter_ms: { min: 0, max: 2000 },
  loss: { min: 0, max: 0.99 },
} as const;

export function clampLinkRequest(req: {
  latency_ms?: number;
  jitter_ms?: number;
  loss?: number;
}): { message: SetLinkParamsMessage; clamped: boolean } {
  let clamped = false;
  const out: SetLinkParamsMessage = { type: "set_link_params" };
  for (const key of ["latency_ms", "jitter_ms", "loss"] as const) {
    const value = req[key];
    if (value === undefined) continue;
    const { min, max } = LINK_BOUNDS[key];
    const v = Math.min(Math.max(value, min), max);
    if (v !== value) clamped = true;
    out[key] = v;
  }
  // Jitter beyond latency is meaningless; clamp before the server does.
  if (out.jitter_ms !== undefined) {
    const limit = out.latency_ms ?? Infinity;
    if (out.jitter_ms > limit) {
      out.jitter_ms = limit;
      clamped = true;
    }
  }
  return { message: out, clamped };
}

export interface HudModel {
  link: LinkParams;
  clamped: boolean;
  startLatencyText: string;
  dropCounter: number;
  staleCounter: number;
  grabbed: number[];
}

export function formatLatency(seconds: number | null): string {
  if (seconds === null || seconds === undefined) return "--";
  return `${(seconds * 1000).toFixed(0)} ms`;
}

export function hudFromStats(link: LinkParams, stats: SnapshotStats, clamped: boolean): HudModel {
  return {
    link,
    clamped,
    startLatencyText: formatLatency(stats.start_latency_s),
    dropCounter: stats.msgs_dropped,
    staleCounter: stats.msgs_stale,
    grabbed: stats.grabbed,
  };
}
