// Browser entry point: wires the bridge client, pointer conversion, HUD
// controls, and the canvas painter together.

import { BridgeClient } from "./bridgeClient.js";
import { clampLinkRequest, formatLatency } from "./hud.js";
import { PointerToHand, type ProxyHit, type Viewport } from "./pointer.js";
import { buildDisplayList, drawDisplayList } from "./render.js";
import type { Snapshot } from "./types.js";

const MAT = 55;
const PX_PER_CM = 7;
const MARGIN = 24;
const GAP = 40;

function viewports(): Record<string, Viewport> {
  const remote: Viewport = {
    originPx: { x: MARGIN, y: MARGIN + MAT * PX_PER_CM },
    pxPerCm: PX_PER_CM,
    matWidthCm: MAT,
    matHeightCm: MAT,
  };
  const local: Viewport = {
    originPx: { x: MARGIN + MAT * PX_PER_CM + GAP, y: MARGIN + MAT * PX_PER_CM },
    pxPerCm: PX_PER_CM,
    matWidthCm: MAT,
    matHeightCm: MAT,
  };
  return { remote, local };
}

function proxiesFrom(snap: Snapshot | null): ProxyHit[] {
  if (!snap) return [];
  return Object.entries(snap.vo).map(([id, pose]) => ({
    id: Number(id),
    center: [pose[0], pose[1]],
    radiusCm: 3.0,
  }));
}

function start() {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const status = document.getElementById("status")!;
  const badge = document.getElementById("badge")!;
  const latencyOut = document.getElementById("latency-readout")!;
  const dropOut = document.getElementById("drop-counter")!;
  const vps = viewports();

  const client = new BridgeClient(WebSocket as any);
  client.onStatus = (s) => (status.textContent = s);

  const pointer = new PointerToHand(vps.remote);

  function render(snap: Snapshot) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    drawDisplayList(ctx, buildDisplayList(snap, MAT, MAT), vps);
    badge.textContent = client.buffer.warning ?? "";
    latencyOut.textContent = formatLatency(snap.stats.start_latency_s);
    dropOut.textContent = String(snap.stats.msgs_dropped);
  }

  let raf = 0;
  client.onSnapshot = () => {
    cancelAnimationFrame(raf);
    raf = requestAnimationFrame(() => {
      const snap = client.buffer.current;
      if (snap) render(snap);
    });
  };

  canvas.addEventListener("pointerdown", (ev) =>

    handlePointer(ev, "down"));
  canvas.addEventListener("pointermove", (ev) => handlePointer(ev, "move"));
  canvas.addEventListener("pointerup", (ev) => handlePointer(ev, "up"));

  function handlePointer(ev: PointerEvent, kind: "down" | "move" | "up") {
    const rect = canvas.getBoundingClientRect();
    const msg = pointer.handle(
      { tMs: ev.timeStamp, px: ev.clientX - rect.left, py: ev.clientY - rect.top, kind },
      proxiesFrom(client.buffer.current),
    );
    if (msg) {
      client.send(msg);
      if (pointer.pinching !== null) {
        const finger = msg.fingers["index"];
        client.send({
          type: "robot_state",
          robot_id: pointer.pinching,
          x: finger[0],
          y: finger[1],
        });
      }
    }
  }

  for (const key of ["latency_ms", "jitter_ms", "loss"] as const) {
    const input = document.getElementById(`slider-${key}`) as HTMLInputElement;
    input.addEventListener("change", () => {
      const { message, clamped } = clampLinkRequest({ [key]: Number(input.value) });
      client.send(message);
      if (clamped) status.textContent = `${key} clamped`;
    });
  }

  (document.getElementById("connect") as HTMLButtonElement).addEventListener(
    "click",
    async () => {
      const url = (document.getElementById("url") as HTMLInputElement).value;
      await client.connect(url);
      status.textContent = `connected: ${String(client.hello?.scenario["id"])}`;
    },
  );
}

window.addEventListener("DOMContentLoaded", start);
