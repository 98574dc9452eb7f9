"""Websocket bridge: the UI-facing JSON mirror of the wire message set.

The bridge wraps one session and serves it to browser clients.  Field
names and units match the wire spec (lower_snake_case, cm, degrees,
seconds).  Two clock modes:

* paced (default): the session advances in wall-clock time and snapshots
  broadcast at ~30 Hz; this is the interactive mode.
* lockstep: the session advances only on client ``advance`` messages and a
  snapshot is sent after each, making UI-driven runs exactly reproducible.

Clients never mutate simulation state except through these messages;
closing the socket leaves a headless run unaffected.
"""

from __future__ import annotations

import asyncio
import json
import logging

import websockets

from .coupling import BodySkeleton, HandPose
from .engine import TwoRoomSession
from .geometry import Pose2D
from .scenario import ScenarioSpec

logger = logging.getLogger(__name__)

SNAPSHOT_PERIOD_S = 1.0 / 30.0
PEN_TRACE_TAIL = 400  # points per robot sent to the UI


class BridgeServer:
    def __init__(self, spec: ScenarioSpec, paced: bool = True):
        self.spec = spec
        self.session = TwoRoomSession(spec)
        self.paced = paced
        self.clients: set = set()

    # -- snapshot ------------------------------------------------------

    def snapshot(self) -> dict:
        s = self.session
        snap = {
            "type": "snapshot",
            "t": s.now,
            "tick": s.tick,
            "rooms": {"remote": s.remote.snapshot(), "local": s.local.snapshot()},
            "vo": {str(k): [p.x, p.y, p.theta] for k, p in s.vo_poses.items()},
            "goals": {
                str(rid): [g.target[0], g.target[1]]
                for rid, g in getattr(s, "_last_goals", {}).items()
            },
            "widgets": {
                str(w.widget_id): {"kind": w.kind, "params": dict(w.params)}
                for w in s.widgets.values()
            },
            "pen_traces": {
                str(rid): [list(p) for p in pts[-PEN_TRACE_TAIL:]]
                for rid, pts in s.local.pen_traces.items()
            },
            "hand": {
                str(hid): {
                    "fingers": {k: list(v) for k, v in h.fingers.items()},
                    "grab_state": h.grab_state,
                }
                for hid, h in getattr(s, "_hands_now", {}).items()
            },
            "touch_zones": [
                {"id": z.zone_id, "center": list(z.center), "radius_cm": z.radius}
                for z in self.spec.rooms["local"].touch_zones
            ],
            "link": s.link_params(),
            "stats": {
                "msgs_sent": s.link_rl.stats.sent + s.link_lr.stats.sent,
                "msgs_dropped": s.link_rl.stats.dropped + s.link_lr.stats.dropped,
                "msgs_delivered": s.link_rl.stats.delivered + s.link_lr.stats.delivered,
                "msgs_stale": s.replica_local.stale + s.replica_remote.stale,
                "start_latency_s": s.last_start_latency_s,
                "grabbed": [rid for rid, f in s._grab_flag.items() if f],
            },
        }
        return snap

    # -- client messages ----------------------------------------------

    def handle_message(self, data: dict) -> dict | None:
        """Apply one client message; returns an immediate reply or None."""
        kind = data.get("type")
        s = self.session
        if kind == "advance":
            ticks = int(data.get("ticks", 1))
            for _ in range(max(1, min(ticks, 10_000))):
                s.step()
            return self.snapshot()
        if kind == "hand_pose":
            fingers = {
                name: (float(xy[0]), float(xy[1]))
                for name, xy in data.get("fingers", {}).items()
            }
            s.injected_hands[int(data.get("hand_id", 1))] = HandPose(
                timestamp=s.now,
                fingers=fingers,
                grab_state=data.get("grab_state", "open"),
                grabbed_object=data.get("object"),
            )
            return None
        if kind == "pointer_input":
            # Mouse/touch stand-in: the pointer is the index finger.
            fingers = {"index": (float(data["x_cm"]), float(data["y_cm"]))}
            pinching = bool(data.get("pressed")) and data.get("object") is not None
            s.injected_hands[1] = HandPose(
                timestamp=s.now,
                fingers=fingers,
                grab_state="pinching" if pinching else "open",
                grabbed_object=data.get("object") if pinching else None,
            )
            if pinching:
                s.injected_vo[int(data["object"])] = Pose2D(
                    float(data["x_cm"]), float(data["y_cm"]), 0.0
                )
            return None
        if kind == "body_pose":
            joints = {
                name: (float(xy[0]), float(xy[1]))
                for name, xy in data.get("joints", {}).items()
            }
            s.injected_skeletons[int(data.get("skeleton_id", 1))] = BodySkeleton(
                timestamp=s.now,
                joints=joints,
                world_to_miniature_scale=float(data.get("scale", 1.0)),
            )
            return None
        if kind == "robot_state":
            pose = Pose2D(float(data["x"]), float(data["y"]), float(data.get("theta", 0.0)))
            subject = int(data["robot_id"])
            if subject in s.remote.robots:
                s.injected_remote_robots[subject] = pose
            else:
                s.injected_vo[subject] = pose
            return None
        if kind == "set_link_params":
            requested = {
                "latency_ms": data.get("latency_ms"),
                "jitter_ms": data.get("jitter_ms"),
                "loss": data.get("loss"),
            }
            s.set_link_params(
                requested["latency_ms"], requested["jitter_ms"], requested["loss"]
            )
            applied = s.link_params()
            clamped = any(
                requested[k] is not None and abs(requested[k] - applied[key2]) > 1e-9
                for k, key2 in (
                    ("latency_ms", "latency_ms"),
                    ("jitter_ms", "jitter_ms"),
                    ("loss", "loss"),
                )
            )
            return {"type": "link_params", "applied": applied, "clamped": clamped}
        if kind == "trigger":
            s.pending_triggers.append((str(data.get("label", "ui")), data.get("robot")))
            return None
        if kind == "bind_ctl":
            binding = s.coupler.binding(int(data["binding"]))
            if binding is None:
                return {"type": "error", "message": f"no binding {data['binding']}"}
            if "active" in data:
                binding.active = bool(data["active"])
            if "tolerance_cm" in data:
                binding.tolerance_override = (
                    float(data["tolerance_cm"]) if data["tolerance_cm"] is not None else None
                )
            return None
        return {"type": "error", "message": f"unknown message type {kind!r}"}

    # -- serving -------------------------------------------------------

    async def _broadcast(self, payload: dict) -> None:
        if not self.clients:
            return
        raw = json.dumps(payload)
        await asyncio.gather(
            *(c.send(raw) for c in self.clients), return_exceptions=True
        )

    async def _paced_loop(self) -> None:
        loop = asyncio.get_running_loop()
        started = loop.time()
        last_snap = 0.0
        while True:
            target = self.session.now
            elapsed = loop.time() - started
            if elapsed >= target:
                self.session.step()
            else:
                await asyncio.sleep(min(self.session.dt, target - elapsed))
            if loop.time() - last_snap >= SNAPSHOT_PERIOD_S:
                last_snap = loop.time()
                await self._broadcast(self.snapshot())

    async def _handler(self, ws) -> None:
        self.clients.add(ws)
        try:
            await ws.send(
                json.dumps(
                    {
                        "type": "hello",
                        "scenario": self.spec.resolved,
                        "dt_s": self.spec.dt_s,
                        "paced": self.paced,
                        "link": self.session.link_params(),
                    }
                )
            )
            async for raw in ws:
                try:
                    data = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send(json.dumps({"type": "error", "message": "bad JSON"}))
                    continue
                reply = self.handle_message(data)
                if reply is not None:
                    await ws.send(json.dumps(reply))
        finally:
            self.clients.discard(ws)

    async def serve(self, host: str, port: int) -> None:
        async with websockets.serve(self._handler, host, port) as server:
            actual = server.sockets[0].getsockname()[1] if server.sockets else port
            print(f"BRIDGE READY ws://{host}:{actual}", flush=True)
            if self.paced:
                await self._paced_loop()
            else:
                await asyncio.Future()  # lockstep: clients drive time


def serve_bridge(spec: ScenarioSpec, host: str, port: int, paced: bool = True) -> None:
    server = BridgeServer(spec, paced=paced)
    try:
        asyncio.run(server.serve(host, port))
    except KeyboardInterrupt:
        pass
