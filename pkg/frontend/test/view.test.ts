import { describe, expect, it } from "vitest";

import { applyEvent, applySnapshot, emptyView, TRAIL_LIMIT } from "../src/view.js";
import type { Snapshot } from "../src/types.js";

function snapshot(): Snapshot {
  return {
    format_version: 1,
    clock: 0,
    round: 0,
    done: false,
    status: "running",
    grid: { dims: [10, 10, 1], resolution: 1, origin: [0, 0, 0] },
    agents: [
      { id: "R1", pose: [1, 1, 0.5], yaw: 0, mode: "Grounded", task: null, home: [1, 1, 0.5] },
    ],
    tasks: [
      {
        id: "T1", kind: "inspect", location: [5, 5, 0.5], status: "pending",
        added_s: 0, finished_s: null, execution_s: null, agent: null,
      },
    ],
  };
}

describe("view reducers", () => {
  it("rebuilds everything from a snapshot", () => {
    const v = emptyView();
    applySnapshot(v, snapshot());
    expect(v.agents.get("R1")?.mode).toBe("Grounded");
    expect(v.tasks.get("T1")?.status).toBe("pending");
    expect(v.taskOrder).toEqual(["T1"]);
  });

  it("walks a task through its lifecycle", () => {
    const v = emptyView();
    applySnapshot(v, snapshot());
    applyEvent(v, { kind: "task_assigned", t: 1.2, task: "T1", agent: "R1" });
    expect(v.tasks.get("T1")?.status).toBe("assigned");
    expect(v.tasks.get("T1")?.agent).toBe("R1");
    applyEvent(v, { kind: "task_finished", t: 11.2, task: "T1", agent: "R1" });
    const t = v.tasks.get("T1")!;
    expect(t.status).toBe("completed");
    expect(t.finished_s).toBe(11.2);
    expect(t.execution_s).toBeCloseTo(10.0, 6); // finished - max(added, assigned)
  });

  it("adds operator tasks from events", () => {
    const v = emptyView();
    applySnapshot(v, snapshot());
    applyEvent(v, { kind: "task_added", t: 4.0, task: "OP1", task_kind: "inspect",
                    location: [2, 2, 0.5] });
    expect(v.taskOrder).toEqual(["T1", "OP1"]);
    expect(v.tasks.get("OP1")?.status).toBe("pending");
    expect(v.tasks.get("OP1")?.added_s).toBe(4.0);
  });

  it("tracks telemetry into trails and clock, capped", () => {
    const v = emptyView();
    applySnapshot(v, snapshot());
    for (let i = 0; i < TRAIL_LIMIT + 50; i++) {
      applyEvent(v, { kind: "telemetry", t: i * 0.1, agent: "R1",
                      pose: [1 + i * 0.01, 1, 0.5], mode: "Flying", task: "T1" });
    }
    expect(v.trails.get("R1")!.length).toBe(TRAIL_LIMIT);
    expect(v.agents.get("R1")?.mode).toBe("Flying");
    expect(v.clock).toBeCloseTo((TRAIL_LIMIT + 49) * 0.1, 6);
  });

  it("drops malformed events but survives", () => {
    const v = emptyView();
    applySnapshot(v, snapshot());
    applyEvent(v, {} as never);
    applyEvent(v, { kind: "telemetry", agent: "nope", pose: "bad" } as never);
    applyEvent(v, { kind: "task_assigned", task: "missing" });
    expect(v.droppedEvents).toBe(3);
    expect(v.tasks.get("T1")?.status).toBe("pending"); // untouched
  });

  it("is stateless wrt truth: re-applying snapshot+events reproduces the view", () => {
    const events = [
      { kind: "task_assigned", t: 1.0, task: "T1", agent: "R1" },
      { kind: "telemetry", t: 1.1, agent: "R1", pose: [2, 2, 0.5], mode: "Flying", task: "T1" },
      { kind: "announce", t: 2.0, round: 3 },
      { kind: "task_finished", t: 9.0, task: "T1", agent: "R1" },
    ];
    const a = emptyView();
    const b = emptyView();
    for (const v of [a, b]) {
      applySnapshot(v, snapshot());
      for (const e of events) applyEvent(v, e as never);
    }
    expect(JSON.stringify([...a.tasks])).toBe(JSON.stringify([...b.tasks]));
    expect(JSON.stringify([...a.agents])).toBe(JSON.stringify([...b.agents]));
    expect(a.round).toBe(3);
  });

  it("marks the mission finished", () => {
    const v = emptyView();
    applySnapshot(v, snapshot());
    applyEvent(v, { kind: "mission_end", t: 100, reason: "complete" });
    expect(v.status).toBe("finished");
  });
});
