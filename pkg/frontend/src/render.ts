// Canvas + DOM rendering of the live mission view (browser only).

import { MapProjection } from "./projection.js";
import type { GridCells, Vec3 } from "./types.js";
import type { ViewState } from "./view.js";

const STATUS_COLORS: Record<string, string> = {
  pending: "#e8a33d",
  assigned: "#4d9de0",
  completed: "#3bb273",
  unserviceable: "#e15554",
};

const AGENT_COLORS = ["#7768ae", "#1b9aaa", "#ef767a", "#49a078", "#c4a000"];

export class MapRenderer {
  proj: MapProjection;
  zMode: "max" | number = "max";
  private agentColor = new Map<string, string>();

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly grid: GridCells,
  ) {
    this.proj = new MapProjection(grid, canvas.width, canvas.height);
  }

  colorFor(agentId: string): string {
    let c = this.agentColor.get(agentId);
    if (!c) {
      c = AGENT_COLORS[this.agentColor.size % AGENT_COLORS.length];
      this.agentColor.set(agentId, c);
    }
    return c;
  }

  private cellVisible(k: number): boolean {
    return this.zMode === "max" || this.zMode === k;
  }

  draw(state: ViewState): void {
    const ctx = this.canvas.getContext("2d")!;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#f4f1ea";
    ctx.fillRect(0, 0, width, height);

    const cell = this.proj.cellSizePx();
    const paint = (cells: Vec3[], color: string) => {
      ctx.fillStyle = color;
      for (const [i, j, k] of cells) {
        if (!this.cellVisible(k)) continue;
        const [sx, sy] = this.proj.worldToScreen(
          this.grid.origin[0] + i * this.grid.resolution,
          this.grid.origin[1] + (j + 1) * this.grid.resolution,
        );
        ctx.fillRect(sx, sy, cell + 0.5, cell + 0.5);
      }
    };
    paint(this.grid.unknown, "#d9d4c7");
    paint(this.grid.occupied, "#3c3a36");

    // planned routes, then trails on top
    for (const [id, path] of state.plannedPaths) {
      this.strokePolyline(ctx, path, "#bbb7ad", 1, [4, 4]);
      void id;
    }
    for (const [id, trail] of state.trails) {
      this.strokePolyline(ctx, trail, this.colorFor(id), 2);
    }

    for (const task of state.tasks.values()) {
      const [sx, sy] = this.proj.worldToScreen(task.location[0], task.location[1]);
      ctx.fillStyle = STATUS_COLORS[task.status] ?? "#999";
      ctx.fillRect(sx - 5, sy - 5, 10, 10);
      ctx.fillStyle = "#222";
      ctx.font = "11px sans-serif";
      ctx.fillText(task.id, sx + 7, sy + 4);
    }

    for (const agent of state.agents.values()) {
      const [sx, sy] = this.proj.worldToScreen(agent.pose[0], agent.pose[1]);
      ctx.beginPath();
      ctx.arc(sx, sy, 6, 0, 2 * Math.PI);
      ctx.fillStyle = this.colorFor(agent.id);
      ctx.fill();
      ctx.strokeStyle = agent.mode === "Grounded" ? "#222" : "#fff";
      ctx.stroke();
      ctx.fillStyle = "#222";
      ctx.font = "bold 11px sans-serif";
      ctx.fillText(`${agent.id} (${agent.mode})`, sx + 8, sy - 6);
    }
  }

  private strokePolyline(
    ctx: CanvasRenderingContext2D,
    points: Vec3[],
    color: string,
    width: number,
    dash: number[] = [],
  ): void {
    if (points.length < 2) return;
    ctx.strokeStyle = color;
    ctx.lineWidth = width;
    ctx.setLineDash(dash);
    ctx.beginPath();
    const [x0, y0] = this.proj.worldToScreen(points[0][0], points[0][1]);
    ctx.moveTo(x0, y0);
    for (const p of points.slice(1)) {
      const [sx, sy] = this.proj.worldToScreen(p[0], p[1]);
      ctx.lineTo(sx, sy);
    }
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

export function renderTaskTable(tbody: HTMLElement, state: ViewState): void {
  const fmt = (v: number | null) => (v === null || v === undefined ? "-" : v.toFixed(1));
  const rows = state.taskOrder
    .map((id) => state.tasks.get(id))
    .filter((t): t is NonNullable<typeof t> => !!t)
    .map(
      (t) => `<tr>
        <td>${t.id}</td><td>${fmt(t.added_s)}</td><td>${fmt(t.finished_s)}</td>
        <td>${fmt(t.execution_s)}</td><td>${t.agent ?? "-"}</td>
        <td><span class="badge ${t.status}">${t.status}</span></td>
      </tr>`,
    );
  tbody.innerHTML = rows.join("");
}

export function renderStatusBar(el: HTMLElement, state: ViewState): void {
  const conn =
    state.connection === "live"
      ? ""
      : `<span class="banner">${state.connection === "connecting" ? "connecting..." : "DISCONNECTED - retrying"}</span>`;
  el.innerHTML =
    `clock <b>${state.clock.toFixed(1)} s</b> | round <b>${state.round}</b> ` +
    `| mission <b>${state.status}</b> | event errors ${state.droppedEvents} ${conn}`;
}
