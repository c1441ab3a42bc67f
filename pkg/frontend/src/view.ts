// View-state reducers. The UI is stateless with respect to truth: everything
// here is rebuilt from a server snapshot plus subsequent stream events, so a
// reload reproduces the same view.

import type { AgentView, Snapshot, StreamEvent, TaskView, Vec3 } from "./types.js";

export const TRAIL_LIMIT = 800;

export interface ViewState {
  connection: "connecting" | "live" | "disconnected";
  status: string;
  clock: number;
  round: number;
  agents: Map<string, AgentView>;
  tasks: Map<string, TaskView>;
  taskOrder: string[];
  trails: Map<string, Vec3[]>;
  plannedPaths: Map<string, Vec3[]>;
  assignedAt: Map<string, number>;
  droppedEvents: number;
}

export function emptyView(): ViewState {
  return {
    connection: "connecting",
    status: "created",
    clock: 0,
    round: 0,
    agents: new Map(),
    tasks: new Map(),
    taskOrder: [],
    trails: new Map(),
    plannedPaths: new Map(),
    assignedAt: new Map(),
    droppedEvents: 0,
  };
}

export function applySnapshot(state: ViewState, snap: Snapshot): void {
  state.status = snap.status;
  state.clock = snap.clock;
  state.round = snap.round;
  state.agents = new Map(snap.agents.map((a) => [a.id, a]));
  state.tasks = new Map(snap.tasks.map((t) => [t.id, { ...t }]));
  state.taskOrder = snap.tasks.map((t) => t.id);
  // trails are cosmetic history; they restart from the snapshot
  state.trails = new Map();
  state.plannedPaths = new Map();
}

export function applyEvent(state: ViewState, ev: StreamEvent): void {
  if (!ev || typeof ev.kind !== "string") {
    state.droppedEvents += 1;
    return;
  }
  try {
    dispatch(state, ev);
  } catch {
    state.droppedEvents += 1; // malformed payload: drop it, session survives
  }
}

function dispatch(state: ViewState, ev: StreamEvent): void {
  switch (ev.kind) {
    case "telemetry": {
      const id = ev.agent as string;
      const pose = ev.pose as Vec3;
      const agent = state.agents.get(id);
      if (!agent || !Array.isArray(pose)) throw new Error("bad telemetry");
      agent.pose = pose;
      agent.mode = ev.mode as string;
      agent.task = (ev.task as string | null) ?? null;
      const trail = state.trails.get(id) ?? [];
      trail.push(pose);
      if (trail.length > TRAIL_LIMIT) trail.splice(0, trail.length - TRAIL_LIMIT);
      state.trails.set(id, trail);
      if (Array.isArray(ev.path)) state.plannedPaths.set(id, ev.path as Vec3[]);
      if (typeof ev.t === "number" && ev.t > state.clock) state.clock = ev.t;
      break;
    }
    case "task_added": {
      const id = ev.task as string;
      if (typeof id !== "string") throw new Error("bad task_added");
      if (!state.tasks.has(id)) state.taskOrder.push(id);
      state.tasks.set(id, {
        id,
        kind: (ev.task_kind as string) ?? "inspect",
        location: (ev.location as Vec3) ?? [0, 0, 0],
        status: "pending",
        added_s: (ev.t as number) ?? 0,
        finished_s: null,
        execution_s: null,
        agent: null,
      });
      break;
    }
    case "task_assigned": {
      const task = mustTask(state, ev);
      task.status = "assigned";
      task.agent = (ev.agent as string) ?? task.agent;
      if (typeof ev.t === "number") state.assignedAt.set(task.id, ev.t);
      break;
    }
    case "task_finished": {
      const task = mustTask(state, ev);
      task.status = "completed";
      task.agent = (ev.agent as string) ?? task.agent;
      if (typeof ev.t === "number") {
        task.finished_s = ev.t;
        const start = Math.max(task.added_s, state.assignedAt.get(task.id) ?? task.added_s);
        task.execution_s = Math.round((ev.t - start) * 1e6) / 1e6;
      }
      break;
    }
    case "task_unserviceable": {
      mustTask(state, ev).status = "unserviceable";
      break;
    }
    case "announce": {
      if (typeof ev.round === "number") state.round = ev.round;
      if (typeof ev.t === "number" && ev.t > state.clock) state.clock = ev.t;
      break;
    }
    case "mission_end": {
      state.status = "finished";
      break;
    }
    case "drop":
      break; // channel losses are visible in logs; nothing to draw
    default:
      break; // unknown kinds are forward-compatible no-ops
  }
}

function mustTask(state: ViewState, ev: StreamEvent): TaskView {
  const task = state.tasks.get(ev.task as string);
  if (!task) throw new Error(`unknown task ${String(ev.task)}`);
  return task;
}
