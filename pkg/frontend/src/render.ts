// Immediate-mode rendering: each snapshot becomes a display list of
// primitives in room-local mat coordinates, then a thin painter maps them
// through the viewport onto a canvas. Keeping the list construction pure
// makes the geometry testable without a DOM.

import type { Snapshot } from "./types.js";
import { cmToPx, type Viewport } from "./pointer.js";

export const ROBOT_SIDE_CM = 3.2;

export type Shape =
  | { kind: "mat"; room: string; w: number; h: number }
  | { kind: "robot"; room: string; id: string; x: number; y: number; theta: number; side: number; grabbed: boolean }
  | { kind: "object"; room: string; id: string; x: number; y: number; r: number }
  | { kind: "proxy"; room: string; id: string; x: number; y: number }
  | { kind: "goal"; room: string; id: string; x: number; y: number }
  | { kind: "polyline"; room: string; id: string; points: [number, number][] }
  | { kind: "zone"; room: string; id: string; x: number; y: number; r: number }
  | { kind: "hand"; room: string; x: number; y: number; pinching: boolean }
  | { kind: "image"; room: string; x: number; y: number; w: number; h: number };

export function buildDisplayList(snap: Snapshot, matW = 55, matH = 55): Shape[] {
  const shapes: Shape[] = [];
  for (const room of ["remote", "local"] as const) {
    shapes.push({ kind: "mat", room, w: matW, h: matH });
    const data = snap.rooms[room];
    for (const [id, pose] of Object.entries(data.robots)) {
      shapes.push({
        kind: "robot",
        room,
        id,
        x: pose[0],
        y: pose[1],
        theta: pose[2],
        side: ROBOT_SIDE_CM,
        grabbed: room === "local" && snap.stats.grabbed.map(String).includes(id),
      });
    }
    for (const [id, pose] of Object.entries(data.objects)) {
      shapes.push({ kind: "object", room, id, x: pose[0], y: pose[1], r: 1.5 });
    }
  }
  for (const [id, pose] of Object.entries(snap.vo)) {
    shapes.push({ kind: "proxy", room: "remote", id, x: pose[0], y: pose[1] });
  }
  for (const [id, goal] of Object.entries(snap.goals)) {
    shapes.push({ kind: "goal", room: "local", id, x: goal[0], y: goal[1] });
  }
  for (const [id, pts] of Object.entries(snap.pen_traces)) {
    shapes.push({ kind: "polyline", room: "local", id, points: pts.map((p) => [p[0], p[1]]) });
  }
  for (const zone of snap.touch_zones) {
    shapes.push({
      kind: "zone",
      room: "local",
      id: String(zone.id),
      x: zone.center[0],
      y: zone.center[1],
      r: zone.radius_cm,
    });
  }
  for (const hand of Object.values(snap.hand)) {
    const index = hand.fingers["index"];
    if (index) {
      shapes.push({
        kind: "hand",
        room: "remote",
        x: index[0],
        y: index[1],
        pinching: hand.grab_state === "pinching",
      });
    }
  }
  for (const widget of Object.values(snap.widgets)) {
    if (widget.kind === "control_points" && "scale" in widget.params) {
      const { tx, ty, scale } = widget.params as { tx: number; ty: number; scale: number };
      shapes.push({
        kind: "image",
        room: "local",
        x: tx,
        y: ty,
        w: scale * 20,
        h: scale * 20,
      });
    }
  }
  return shapes;
}

/** Tracks the last renderable snapshot so a malformed one never blanks the view. */
export class SnapshotBuffer {
  private lastGood: Snapshot | null = null;
  warning: string | null = null;

  push(raw: unknown): Snapshot | null {
    const snap = raw as Snapshot;
    if (
      !snap ||
      snap.type !== "snapshot" ||
      typeof snap.t !== "number" ||
      !snap.rooms ||
      !snap.rooms.local ||
      !snap.rooms.remote
    ) {
      this.warning = "malformed snapshot; showing last good frame";
      return this.lastGood;
    }
    this.warning = null;
    this.lastGood = snap;
    return snap;
  }

  get current(): Snapshot | null {
    return this.lastGood;
  }
}

const COLORS: Record<string, string> = {
  mat: "#223",
  robot: "#e8b84a",
  object: "#7fb069",
  proxy: "#67b7dc",
  goal: "#d6604d",
  polyline: "#cc4444",
  zone: "#a884c4",
  hand: "#67b7dc",
  image: "#4477aa",
};

export function drawDisplayList(
  ctx: CanvasRenderingContext2D,
  shapes: Shape[],
  viewports: Record<string, Viewport>,
): void {
  for (const shape of shapes) {
    const vp = viewports[shape.room];
    if (!vp) continue;
    ctx.strokeStyle = COLORS[shape.kind] ?? "#ccc";
    ctx.fillStyle = ctx.strokeStyle;
    switch (shape.kind) {
      case "mat": {
        const o = cmToPx(vp, 0, shape.h);
        ctx.strokeRect(o.x, o.y, shape.w * vp.pxPerCm, shape.h * vp.pxPerCm);
        break;
      }
      case "robot": {
        const c = cmToPx(vp, shape.x, shape.y);
        const half = (shape.side / 2) * vp.pxPerCm;
        ctx.save();
        ctx.translate(c.x, c.y);
        ctx.rotate((-shape.theta * Math.PI) / 180);
        ctx.strokeStyle = shape.grabbed ? "#ff5555" : COLORS.robot;
        ctx.strokeRect(-half, -half, 2 * half, 2 * half);
        ctx.beginPath();
        ctx.moveTo(0, 0);
        ctx.lineTo(half, 0);
        ctx.stroke();
        ctx.restore();
        break;
      }
      case "object":
      case "zone": {
        const c = cmToPx(vp, shape.x, shape.y);
        ctx.beginPath();
        ctx.arc(c.x, c.y, shape.r * vp.pxPerCm, 0, 2 * Math.PI);
        ctx.stroke();
        break;
      }
      case "proxy":
      case "hand": {
        const c = cmToPx(vp, shape.x, shape.y);
        ctx.beginPath();
        ctx.arc(c.x, c.y, 4, 0, 2 * Math.PI);
        ctx.fill();
        break;
      }
      case "goal": {
        const c = cmToPx(vp, shape.x, shape.y);
        ctx.beginPath();
        ctx.moveTo(c.x - 5, c.y);
        ctx.lineTo(c.x + 5, c.y);
        ctx.moveTo(c.x, c.y - 5);
        ctx.lineTo(c.x, c.y + 5);
        ctx.stroke();
        break;
      }
      case "polyline": {
        if (shape.points.length < 2) break;
        ctx.beginPath();
        const start = cmToPx(vp, shape.points[0][0], shape.points[0][1]);
        ctx.moveTo(start.x, start.y);
        for (const [x, y] of shape.points.slice(1)) {
          const p = cmToPx(vp, x, y);
          ctx.lineTo(p.x, p.y);
        }
        ctx.stroke();
        break;
      }
      case "image": {
        const o = cmToPx(vp, shape.x, shape.y + shape.h);
        ctx.globalAlpha = 0.4;
        ctx.strokeRect(o.x, o.y, shape.w * vp.pxPerCm, shape.h * vp.pxPerCm);
        ctx.globalAlpha = 1.0;
        break;
      }
    }
  }
}
