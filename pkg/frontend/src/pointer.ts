// Pointer-to-hand conversion: the mouse/touch pointer stands in for the
// remote user's index finger. Dragging streams hand poses at <= 60 Hz;
// click-holding on a virtual proxy pinches it until release.

import type { HandPoseMessage, Point } from "./types.js";

export interface Viewport {
  /** Canvas pixel position of the mat's bottom-left corner. */
  originPx: { x: number; y: number };
  pxPerCm: number;
  matWidthCm: number;
  matHeightCm: number;
}

/** Canvas pixels -> mat cm. Canvas y grows downward, mat y grows upward. */
export function pxToCm(vp: Viewport, px: number, py: number): Point {
  return [(px - vp.originPx.x) / vp.pxPerCm, (vp.originPx.y - py) / vp.pxPerCm];
}

/** Mat cm -> canvas pixels. */
export function cmToPx(vp: Viewport, x: number, y: number): { x: number; y: number } {
  return { x: vp.originPx.x + x * vp.pxPerCm, y: vp.originPx.y - y * vp.pxPerCm };
}

export function insideMat(vp: Viewport, p: Point): boolean {
  return p[0] >= 0 && p[0] <= vp.matWidthCm && p[1] >= 0 && p[1] <= vp.matHeightCm;
}

export interface ProxyHit {
  id: number;
  center: Point;
  radiusCm: number;
}

export function hitProxy(proxies: ProxyHit[], p: Point): number | null {
  for (const proxy of proxies) {
    const dx = p[0] - proxy.center[0];
    const dy = p[1] - proxy.center[1];
    if (Math.hypot(dx, dy) <= proxy.radiusCm) return proxy.id;
  }
  return null;
}

const MAX_RATE_HZ = 60;

export interface PointerEventLike {
  tMs: number; // event timestamp, milliseconds
  px: number;
  py: number;
  kind: "down" | "move" | "up";
}

/**
 * Stateful converter from raw pointer events to hand-pose messages.
 * Emits at most one message per 1/60 s while dragging; down over a proxy
 * switches the grab state to pinching until the pointer lifts.
 */
export class PointerToHand {
  private lastEmitMs = -Infinity;
  private pinchedObject: number | null = null;
  private down = false;

  constructor(
    private readonly vp: Viewport,
    private readonly handId: number = 1,
  ) {}

  get pinching(): number | null {
    return this.pinchedObject;
  }

  handle(ev: PointerEventLike, proxies: ProxyHit[] = []): HandPoseMessage | null {
    const p = pxToCm(this.vp, ev.px, ev.py);
    if (ev.kind === "down") {
      this.down = true;
      this.pinchedObject = hitProxy(proxies, p);
      this.lastEmitMs = ev.tMs;
      return this.message(p);
    }
    if (ev.kind === "up") {
      this.down = false;
      this.pinchedObject = null;
      this.lastEmitMs = ev.tMs;
      return this.message(p);
    }
    if (!this.down) return null;
    if (ev.tMs - this.lastEmitMs < 1000 / MAX_RATE_HZ) return null; // throttle
    this.lastEmitMs = ev.tMs;
    return this.message(p);
  }

  private message(p: Point): HandPoseMessage {
    const pinching = this.pinchedObject !== null;
    return {
      type: "hand_pose",
      hand_id: this.handId,
      fingers: { index: p },
      grab_state: pinching ? "pinching" : "open",
      object: this.pinchedObject,
    };
  }
}
