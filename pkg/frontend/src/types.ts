// Bridge message schema: a JSON mirror of the wire message set plus the
// UI-only types. Field names and units match the wire spec exactly
// (lower_snake_case, cm, degrees, seconds).

export type Point = [number, number];

export interface RobotPose {
  /** [x_cm, y_cm, theta_deg, v_cm_s, omega_deg_s] */
  0: number; 1: number; 2: number; 3: number; 4: number;
  length: 5;
}

export interface RoomSnapshot {
  robots: Record<string, number[]>;
  objects: Record<string, number[]>;
}

export interface LinkParams {
  latency_ms: number;
  jitter_ms: number;
  loss: number;
}

export interface SnapshotStats {
  msgs_sent: number;
  msgs_dropped: number;
  msgs_delivered: number;
  msgs_stale: number;
  start_latency_s: number | null;
  grabbed: number[];
}

export interface WidgetState {
  kind: string;
  params: Record<string, number>;
}

export interface TouchZoneInfo {
  id: number;
  center: Point;
  radius_cm: number;
}

export interface Snapshot {
  type: "snapshot";
  t: number;
  tick: number;
  rooms: { remote: RoomSnapshot; local: RoomSnapshot };
  vo: Record<string, number[]>;
  goals: Record<string, number[]>;
  widgets: Record<string, WidgetState>;
  pen_traces: Record<string, Point[]>;
  hand: Record<string, { fingers: Record<string, Point>; grab_state: string }>;
  touch_zones: TouchZoneInfo[];
  link: LinkParams;
  stats: SnapshotStats;
}

export interface Hello {
  type: "hello";
  scenario: Record<string, unknown>;
  dt_s: number;
  paced: boolean;
  link: LinkParams;
}

export type ServerMessage =
  | Hello
  | Snapshot
  | { type: "link_params"; applied: LinkParams; clamped: boolean }
  | { type: "error"; message: string };

export interface HandPoseMessage {
  type: "hand_pose";
  hand_id: number;
  fingers: Record<string, Point>;
  grab_state?: "open" | "pinching";
  object?: number | null;
}

export interface PointerInputMessage {
  type: "pointer_input";
  x_cm: number;
  y_cm: number;
  pressed: boolean;
  object?: number | null;
}

export interface SetLinkParamsMessage {
  type: "set_link_params";
  latency_ms?: number;
  jitter_ms?: number;
  loss?: number;
}

export type ClientMessage =
  | HandPoseMessage
  | PointerInputMessage
  | SetLinkParamsMessage
  | { type: "robot_state"; robot_id: number; x: number; y: number; theta?: number }
  | { type: "body_pose"; skeleton_id: number; scale: number; joints: Record<string, Point> }
  | { type: "trigger"; label: string; robot?: number | null }
  | { type: "bind_ctl"; binding: number; active?: boolean; tolerance_cm?: number | null }
  | { type: "advance"; ticks: number };
