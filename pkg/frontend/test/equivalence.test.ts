// UI/headless equivalence: a recorded pointer script replayed through the
// websocket bridge must produce the same robot trajectory as the scripted
// headless run, within one tick of motion per waypoint.

import WebSocket from "ws";
import { describe, expect, it } from "vitest";

import { BridgeClient } from "../src/bridgeClient.js";
import { pxToCm, type Viewport } from "../src/pointer.js";
import { sampleWaypoints } from "../src/scripting.js";
import type { Snapshot } from "../src/types.js";
import { runHeadless, startBridge, tickRecords } from "./helpers.js";

const vp: Viewport = {
  originPx: { x: 40, y: 425 },
  pxPerCm: 7,
  matWidthCm: 55,
  matHeightCm: 55,
};

/** A recorded pointer drag: 60 Hz samples sweeping across the mat view. */
function recordedPointerScript(): [number, number, number][] {
  const samples: [number, number, number][] = [];
  const n = 90; // 1.5 s at 60 Hz
  for (let i = 0; i <= n; i++) {
    const t = i / 60;
    const u = i / n;
    const px = 110 + u * 180 + 12 * Math.sin(u * Math.PI * 2);
    const py = 300 - u * 200;
    samples.push([t, px, py]);
  }
  return samples;
}

describe("UI equivalence (acceptance)", () => {
  it("bridge-replayed pointer script matches the headless scripted run", async () => {
    const pxScript = recordedPointerScript();
    // pointer_to_hand mapping applied offline: the same cm waypoints feed
    // both the live bridge replay and the headless scenario script.
    const cmScript: number[][] = pxScript.map(([t, px, py]) => {
      const [x, y] = pxToCm(vp, px, py);
      return [t, x, y];
    });
    const durationS = 1.8;

    // --- bridge path -------------------------------------------------
    const bridge = await startBridge();
    const bridgePoses: number[][] = [];
    let scenario: Record<string, any>;
    try {
      const client = new BridgeClient(WebSocket as any);
      const hello = await client.connect(bridge.url);
      expect(hello.paced).toBe(false);
      const dt = hello.dt_s;
      scenario = JSON.parse(JSON.stringify(hello.scenario));
      const nTicks = Math.round(durationS / dt);
      for (let k = 0; k < nTicks; k++) {
        const t = k * dt;
        const [x, y] = sampleWaypoints(cmScript, t);
        client.send({
          type: "hand_pose",
          hand_id: 1,
          fingers: { index: [x, y] },
        });
        const reply = (await client.request({ type: "advance", ticks: 1 })) as Snapshot;
        bridgePoses.push(reply.rooms.local.robots["1"]);
      }
      client.close();
    } finally {
      bridge.stop();
    }

    // --- headless path -----------------------------------------------
    scenario!.duration_s = durationS;
    scenario!.scripts = {
      ...(scenario!.scripts ?? {}),
      hands: [{ hand: 1, fingers: { index: cmScript } }],
    };
    const { records } = await runHeadless(scenario!);
    const headlessPoses = tickRecords(records).map(
      (r) => r.local.robots["1"] as number[],
    );

    expect(headlessPoses.length).toBe(bridgePoses.length);
    const oneTickOfMotion = 17.5 * 0.005; // cm a robot can cover per tick
    let worst = 0;
    for (let k = 0; k < bridgePoses.length; k++) {
      const dx = bridgePoses[k][0] - headlessPoses[k][0];
      const dy = bridgePoses[k][1] - headlessPoses[k][1];
      worst = Math.max(worst, Math.hypot(dx, dy));
    }
    expect(worst).toBeLessThanOrEqual(oneTickOfMotion);

    // And specifically at every recorded waypoint time.
    for (const [t] of cmScript) {
      const k = Math.min(Math.round(t / 0.005), bridgePoses.length - 1);
      const dx = bridgePoses[k][0] - headlessPoses[k][0];
      const dy = bridgePoses[k][1] - headlessPoses[k][1];
      expect(Math.hypot(dx, dy)).toBeLessThanOrEqual(oneTickOfMotion);
    }

    // The robot really chased the drag (sanity against trivially-empty runs).
    const first = bridgePoses[0];
    const last = bridgePoses[bridgePoses.length - 1];
    expect(Math.hypot(last[0] - first[0], last[1] - first[1])).toBeGreaterThan(10);
  });
});
