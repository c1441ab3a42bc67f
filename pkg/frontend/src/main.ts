// Console entry point: wires the session, the canvas map and the task table
// together. Served statically (subterra serve --ui frontend/dist) or pointed
// at a remote service with ?server=http://host:port.

import { MissionApi } from "./api.js";
import { MapRenderer, renderStatusBar, renderTaskTable } from "./render.js";
import { MissionSession } from "./session.js";

const params = new URLSearchParams(location.search);
const base = params.get("server") ?? `${location.protocol}//${location.host}`;

const canvas = document.getElementById("map") as HTMLCanvasElement;
const tbody = document.getElementById("task-rows")!;
const statusBar = document.getElementById("status")!;
const toast = document.getElementById("toast")!;
const sliceSel = document.getElementById("slice") as HTMLSelectElement;
const reportPre = document.getElementById("report")!;

function showToast(message: string): void {
  toast.textContent = message;
  toast.classList.add("visible");
  setTimeout(() => toast.classList.remove("visible"), 4000);
}

async function boot(): Promise<void> {
  const api = new MissionApi(base);
  const grid = await api.grid();
  const renderer = new MapRenderer(canvas, grid);

  sliceSel.innerHTML =
    `<option value="max">all z</option>` +
    Array.from({ length: grid.dims[2] }, (_, k) => `<option value="${k}">z-slice ${k}</option>`).join("");
  sliceSel.onchange = () => {
    renderer.zMode = sliceSel.value === "max" ? "max" : Number(sliceSel.value);
  };

  const session = new MissionSession(base, { onToast: showToast });
  await session.connect();

  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const world = renderer.proj.screenToWorld(ev.clientX - rect.left, ev.clientY - rect.top);
    if (!world) {
      showToast("click is outside the map");
      return;
    }
    const slice = sliceSel.value === "max" ? grid.dims[2] - 1 : Number(sliceSel.value);
    const z = renderer.proj.sliceZ(slice);
    session.addTask([world[0], world[1], z]).catch(() => {});
  });

  for (const action of ["start", "pause", "resume"] as const) {
    document.getElementById(`btn-${action}`)!.addEventListener("click", () => {
      api.control(action).catch((e) => showToast(String(e.message ?? e)));
    });
  }

  let reportShown = false;
  const frame = () => {
    renderer.draw(session.state);
    renderTaskTable(tbody, session.state);
    renderStatusBar(statusBar, session.state);
    if (session.state.status === "finished" && !reportShown) {
      reportShown = true;
      api.report().then((rep) => {
        reportPre.textContent = rep.text ?? JSON.stringify(rep, null, 2);
      });
    }
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

boot().catch((e) => {
  statusBar.innerHTML = `<span class="banner">cannot reach mission service at ${base}: ${e}</span>`;
  setTimeout(() => location.reload(), 5000);
});
