"""Run metrics, JSONL log I/O, replay, and CSV/JSON export.

Every metric is a pure function of the log records: replaying a written
log reproduces the metrics of the original run exactly, bit for bit.  The
log is JSON Lines with a header record carrying the full resolved scenario
configuration, so nothing else is needed.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorruptLog, MissingEvent
from .geometry import Transform2D

# Stable export column order; a compatibility surface, extend only at the end.
CSV_COLUMNS = [
    "scenario_id",
    "seed",
    "duration_s",
    "start_latency_s",
    "tracking_error_mean_cm",
    "tracking_error_max_cm",
    "mirror_lag_mean_cm",
    "mirror_lag_max_cm",
    "path_length_total_cm",
    "convergence_time_mean_s",
    "msgs_sent",
    "msgs_dropped",
    "msgs_delivered",
    "msgs_stale",
    "widget_updates",
]


def dump_records(records: list[dict]) -> bytes:
    out = io.StringIO()
    for r in records:
        out.write(json.dumps(r, sort_keys=True, separators=(",", ":")))
        out.write("\n")
    return out.getvalue().encode()


def write_log(records: list[dict], path: str | Path) -> None:
    Path(path).write_bytes(dump_records(records))


def parse_log_bytes(data: bytes) -> list[dict]:
    records = []
    for i, line in enumerate(data.decode().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptLog(i, f"bad JSON: {exc.msg}") from exc
        if not isinstance(rec, dict) or "kind" not in rec:
            raise CorruptLog(i, "record is not an object with a 'kind'")
        records.append(rec)
    if not records:
        return []
    if records[0]["kind"] != "header":
        raise CorruptLog(1, "first record must be the header")
    return records


def read_log(path: str | Path) -> list[dict]:
    return parse_log_bytes(Path(path).read_bytes())


def replay(records_or_path) -> list[dict]:
    """World snapshots (tick records) reconstructed from a log."""
    if isinstance(records_or_path, (str, Path)):
        records = read_log(records_or_path)
    else:
        records = records_or_path
    return [r for r in records if r["kind"] == "tick"]


@dataclass
class RobotMetrics:
    tracking_error_mean_cm: float | None = None
    tracking_error_max_cm: float | None = None
    path_length_cm: float = 0.0
    convergence_times_s: list[float] = field(default_factory=list)


@dataclass
class RunMetrics:
    scenario_id: str
    seed: int
    duration_s: float
    start_latency_s: float | None = None
    mirror_lag_mean_cm: float | None = None
    mirror_lag_max_cm: float | None = None
    per_robot: dict[str, RobotMetrics] = field(default_factory=dict)
    widget_timeline: list[tuple[float, int, dict]] = field(default_factory=list)
    msg_stats: dict[str, int] = field(default_factory=dict)

    def flat_row(self) -> dict:
        samples = [
            (m.tracking_error_mean_cm, m.tracking_error_max_cm)
            for m in self.per_robot.values()
            if m.tracking_error_mean_cm is not None
        ]
        conv = [t for m in self.per_robot.values() for t in m.convergence_times_s]
        return {
            "scenario_id": self.scenario_id,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "start_latency_s": self.start_latency_s,
            "tracking_error_mean_cm": (
                sum(s[0] for s in samples) / len(samples) if samples else None
            ),
            "tracking_error_max_cm": (
                max(s[1] for s in samples) if samples else None
            ),
            "mirror_lag_mean_cm": self.mirror_lag_mean_cm,
            "mirror_lag_max_cm": self.mirror_lag_max_cm,
            "path_length_total_cm": sum(
                m.path_length_cm for m in self.per_robot.values()
            ),
            "convergence_time_mean_s": sum(conv) / len(conv) if conv else None,
            "msgs_sent": self.msg_stats.get("sent", 0),
            "msgs_dropped": self.msg_stats.get("dropped", 0),
            "msgs_delivered": self.msg_stats.get("delivered", 0),
            "msgs_stale": self.msg_stats.get("stale", 0),
            "widget_updates": len(self.widget_timeline),
        }


def measure_start_latency(records: list[dict], trigger_label: str, robot_id: int) -> float:
    """Seconds from a trigger event to the robot's first nonzero command."""
    trigger_t = None
    for r in records:
        if (
            r["kind"] == "event"
            and r.get("name") == "trigger"
            and r.get("label") == trigger_label
        ):
            trigger_t = r["t"]
            break
    if trigger_t is None:
        raise MissingEvent(f"trigger {trigger_label!r} not found in log")
    key = str(robot_id)
    for r in records:
        if r["kind"] != "tick" or r["t"] < trigger_t - 1e-12:
            continue
        cmd = r.get("cmds", {}).get(key)
        if cmd and (cmd[0] != 0.0 or cmd[1] != 0.0):
            return r["t"] - trigger_t
    raise MissingEvent(f"robot {robot_id} never moved after trigger {trigger_label!r}")


def _dist(ax, ay, bx, by):
    return math.hypot(bx - ax, by - ay)


def compute_metrics(records: list[dict]) -> RunMetrics:
    """Derive all metrics from a log; replaying the log reproduces them."""
    if not records or records[0]["kind"] != "header":
        raise CorruptLog(1, "log has no header record")
    scenario = records[0]["scenario"]
    metric_cfg = scenario.get("metrics", {})
    ticks = [r for r in records if r["kind"] == "tick"]
    duration = scenario.get("duration_s", ticks[-1]["t"] if ticks else 0.0)

    metrics = RunMetrics(
        scenario_id=scenario.get("id", "?"),
        seed=scenario.get("seed", 0),
        duration_s=duration,
    )

    for r in records:
        if r["kind"] == "msg":
            if r["event"] == "recv":
                metrics.msg_stats["delivered"] = metrics.msg_stats.get("delivered", 0) + 1
                if r.get("result") == "stale":
                    metrics.msg_stats["stale"] = metrics.msg_stats.get("stale", 0) + 1
            else:
                metrics.msg_stats[r["event"]] = metrics.msg_stats.get(r["event"], 0) + 1
        elif r["kind"] == "widget":
            metrics.widget_timeline.append((r["t"], r["id"], r["params"]))

    # Per-robot tracking error, path length, convergence episodes.
    warmup = metric_cfg.get("tracking", {}).get("warmup_s", 0.0)
    robot_ids = sorted(
        {rid for t in ticks for rid in t["local"]["robots"]}, key=lambda s: int(s)
    )
    for rid in robot_ids:
        rm = RobotMetrics()
        errors = []
        prev_xy = None
        episode_target = None
        episode_start = None
        episode_done = False
        for t in ticks:
            pose = t["local"]["robots"].get(rid)
            if pose is None:
                continue
            if prev_xy is not None:
                rm.path_length_cm += _dist(prev_xy[0], prev_xy[1], pose[0], pose[1])
            prev_xy = (pose[0], pose[1])
            goal = t.get("goals", {}).get(rid)
            if goal is None:
                episode_target = None
                continue
            gx, gy, _, tol = goal
            err = _dist(pose[0], pose[1], gx, gy)
            if t["t"] >= warmup:
                errors.append(err)
            if (
                episode_target is None
                or _dist(episode_target[0], episode_target[1], gx, gy) > 1e-9
            ):
                episode_target = (gx, gy)
                episode_start = t["t"]
                episode_done = False
            if not episode_done and err <= tol:
                rm.convergence_times_s.append(t["t"] - episode_start)
                episode_done = True
        if errors:
            rm.tracking_error_mean_cm = sum(errors) / len(errors)
            rm.tracking_error_max_cm = max(errors)
        metrics.per_robot[rid] = rm

    # Start latency, when the scenario selects it.
    start_cfg = metric_cfg.get("start_latency")
    if start_cfg:
        try:
            metrics.start_latency_s = measure_start_latency(
                records, start_cfg["trigger"], start_cfg["robot"]
            )
        except MissingEvent:
            metrics.start_latency_s = None

    # Mirror lag: distance between the mapped true source pose and the goal
    # the local side is steering to (replication-induced lag; the deadband
    # standoff is a separate, deterministic offset).
    lag_cfg = metric_cfg.get("mirror_lag")
    if lag_cfg:
        binding = next(
            (
                b
                for b in scenario.get("bindings", [])
                if b["id"] == lag_cfg["binding"]
            ),
            None,
        )
        if binding is not None:
            cal = Transform2D.from_dict(scenario.get("calibration", {}))
            source = str(binding["source"])
            target = str(binding["target"])
            lo, hi = lag_cfg.get("window_s", [duration * 0.5, duration])
            lags = []
            for t in ticks:
                if not (lo <= t["t"] <= hi):
                    continue
                goal = t.get("goals", {}).get(target)
                src = t["remote"]["robots"].get(source) or t.get("vo", {}).get(source)
                if goal is None or src is None:
                    continue
                mx, my = cal.apply((src[0], src[1]))
                lags.append(_dist(mx, my, goal[0], goal[1]))
            if lags:
                metrics.mirror_lag_mean_cm = sum(lags) / len(lags)
                metrics.mirror_lag_max_cm = max(lags)

    return metrics


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:#.6g}"
    return str(v)


def export_metrics(metrics_list, fmt: str) -> bytes:
    """Render metrics rows as CSV or JSON with a stable column order."""
    if isinstance(metrics_list, RunMetrics):
        metrics_list = [metrics_list]
    rows = [m.flat_row() for m in metrics_list]
    if fmt == "csv":
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            out.write(",".join(_format_value(row[c]) for c in CSV_COLUMNS) + "\n")
        return out.getvalue().encode()
    if fmt == "json":
        shaped = [
            {c: (_format_value(row[c]) if isinstance(row[c], float) else row[c]) for c in CSV_COLUMNS}
            for row in rows
        ]
        return (json.dumps(shaped, indent=2, sort_keys=False) + "\n").encode()
    raise ValueError(f"unknown export format {fmt!r}")


def parse_metrics_csv(data: bytes) -> list[dict]:
    """Parse export_metrics CSV output back into typed rows (test oracle)."""
    lines = data.decode().strip().splitlines()
    header = lines[0].split(",")
    out = []
    for line in lines[1:]:
        row = {}
        for key, cell in zip(header, line.split(",")):
            if cell == "":
                row[key] = None
            else:
                try:
                    row[key] = int(cell)
                except ValueError:
                    try:
                        row[key] = float(cell)
                    except ValueError:
                        row[key] = cell
        out.append(row)
    return out
