"""Mission orchestration: scenario files, the lossy comms channel standing in
for the Wi-Fi mesh, the deterministic fixed-step loop over agents and the
auctioneer, the event log, and mission metrics.

Everything on the timeline is driven by the scenario seed; two runs of the
same scenario and seed produce byte-identical event logs.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
import random
import re
import threading
from dataclasses import dataclass
from pathlib import Path as FsPath

from .agent import AgentConfig, AgentSim, Mode, TrackingModel
from .auction import Auctioneer, Bid, Task, TaskStatus
from .planner import CostParams, default_params
from .synthesis import ActionLibrary, load_library
from .world import VoxelGrid, compute_distance_field, load_grid_file

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_AUTO_ID_RE = re.compile(r"^OP\d+$")


class ScenarioError(ValueError):
    pass


class InjectError(ValueError):
    pass


# -- scenario ----------------------------------------------------------------

@dataclass(frozen=True)
class CommsSpec:
    drop_prob: float = 0.0
    latency_s: float = 0.0


@dataclass(frozen=True)
class Timing:
    dt: float = 0.1
    auction_rate: float = 1.0  # rounds per simulated second
    idle_timeout: float = 30.0
    dwell_time: float = 3.0
    goal_tolerance: float = 0.5
    takeoff_height: float = 0.0
    time_cap: float = 1800.0

    @property
    def auction_period(self) -> float:
        return 1.0 / self.auction_rate


@dataclass(frozen=True)
class AgentSpec:
    id: str
    start: tuple[float, float, float]
    yaw: float
    speed: float
    home: tuple[float, float, float]


@dataclass(frozen=True)
class TaskSpec:
    id: str
    kind: str
    location: tuple[float, float, float]


@dataclass
class Scenario:
    name: str
    grid: VoxelGrid
    planner: CostParams
    agents: list[AgentSpec]
    tasks: list[TaskSpec]
    injections: list[tuple[TaskSpec, float]]
    comms: CommsSpec
    timing: Timing
    seed: int
    max_deviation: float = 0.0
    library: ActionLibrary | None = None


def _point(v, what: str) -> tuple[float, float, float]:
    if not isinstance(v, list) or len(v) != 3 or not all(isinstance(c, (int, float)) for c in v):
        raise ScenarioError(f"{what} must be a list of three numbers, got {v!r}")
    return tuple(float(c) for c in v)


def _check_cell(grid: VoxelGrid, p, what: str) -> None:
    if not grid.contains_point(p):
        raise ScenarioError(f"{what} {p} is outside the grid bounds")
    if grid.is_occupied(grid.world_to_grid(p)):
        raise ScenarioError(f"{what} {p} is inside an occupied voxel")


def load_scenario(path, seed_override: int | None = None) -> Scenario:
    path = FsPath(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"malformed scenario at line {e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ScenarioError(f"unsupported format_version {doc.get('format_version')!r}")

    if "grid" not in doc:
        raise ScenarioError("scenario missing 'grid' file reference")
    grid = load_grid_file(path.parent / doc["grid"])

    t_doc = doc.get("timing", {})
    try:
        timing = Timing(**t_doc)
    except TypeError as e:
        raise ScenarioError(f"bad timing section: {e}") from e
    if timing.dt <= 0:
        raise ScenarioError(f"dt must be > 0, got {timing.dt}")
    if timing.auction_rate <= 0:
        raise ScenarioError(f"auction_rate must be > 0, got {timing.auction_rate}")

    c_doc = doc.get("comms", {})
    try:
        comms = CommsSpec(**c_doc)
    except TypeError as e:
        raise ScenarioError(f"bad comms section: {e}") from e
    if not (0.0 <= comms.drop_prob < 1.0):
        raise ScenarioError(f"drop_prob must be in [0, 1), got {comms.drop_prob}")
    if comms.latency_s < 0:
        raise ScenarioError(f"latency_s must be >= 0, got {comms.latency_s}")

    p_doc = doc.get("planner")
    planner = CostParams(**p_doc) if p_doc else default_params(grid.resolution)

    agents = []
    for n, a in enumerate(doc.get("agents", [])):
        if "id" not in a or "start" not in a:
            raise ScenarioError(f"agents[{n}] needs 'id' and 'start'")
        start = _point(a["start"], f"agents[{n}].start")
        home = _point(a["home"], f"agents[{n}].home") if "home" in a else start
        spec = AgentSpec(id=str(a["id"]), start=start, yaw=float(a.get("yaw", 0.0)),
                         speed=float(a.get("speed", 1.0)), home=home)
        if spec.speed <= 0:
            raise ScenarioError(f"agents[{n}].speed must be > 0")
        _check_cell(grid, spec.start, f"agents[{n}].start")
        _check_cell(grid, spec.home, f"agents[{n}].home")
        hover = (spec.home[0], spec.home[1], spec.home[2] + timing.takeoff_height)
        _check_cell(grid, hover, f"agents[{n}] takeoff point")
        agents.append(spec)
    if not agents:
        raise ScenarioError("scenario declares no agents")
    ids = [a.id for a in agents]
    if len(set(ids)) != len(ids):
        raise ScenarioError(f"duplicate agent ids: {ids}")

    def task_spec(entry, what: str) -> TaskSpec:
        if "id" not in entry or "location" not in entry:
            raise ScenarioError(f"{what} needs 'id' and 'location'")
        tid = str(entry["id"])
        if _AUTO_ID_RE.match(tid):
            raise ScenarioError(f"{what}: id '{tid}' collides with operator-injected id space")
        loc = _point(entry["location"], f"{what}.location")
        _check_cell(grid, loc, f"{what}.location")
        return TaskSpec(id=tid, kind=str(entry.get("kind", "inspect")), location=loc)

    tasks = [task_spec(t, f"tasks[{n}]") for n, t in enumerate(doc.get("tasks", []))]
    injections = []
    for n, inj in enumerate(doc.get("injections", [])):
        if "task" not in inj or "at" not in inj:
            raise ScenarioError(f"injections[{n}] needs 'task' and 'at'")
        at = float(inj["at"])
        if at < 0:
            raise ScenarioError(f"injections[{n}].at must be >= 0")
        injections.append((task_spec(inj["task"], f"injections[{n}].task"), at))
    all_ids = [t.id for t in tasks] + [t.id for t, _ in injections]
    if len(set(all_ids)) != len(all_ids):
        raise ScenarioError(f"duplicate task ids: {all_ids}")

    seed = int(doc.get("seed", 0))
    if seed_override is not None:
        seed = seed_override
    return Scenario(
        name=str(doc.get("name", path.stem)),
        grid=grid,
        planner=planner,
        agents=agents,
        tasks=tasks,
        injections=sorted(injections, key=lambda x: x[1]),
        comms=comms,
        timing=timing,
        seed=seed,
        max_deviation=float(doc.get("tracking", {}).get("max_deviation", 0.0)),
    )


# -- comms channel -------------------------------------------------------------

class CommsChannel:
    """Parametric lossy channel: each message is dropped with probability
    drop_prob (decided at send time from the seeded stream) or delivered at
    send time + latency. Same-recipient messages are never reordered."""

    def __init__(self, drop_prob: float, latency_s: float, rng: random.Random):
        if not (0.0 <= drop_prob < 1.0):
            raise ValueError(f"drop_prob must be in [0, 1), got {drop_prob}")
        self.drop_prob = drop_prob
        self.latency_s = latency_s
        self.rng = rng
        self._seq = 0
        self._queues: dict[str, list] = {}

    def send(self, msg: dict, recipient: str, at: float) -> float | None:
        """Returns the scheduled delivery time, or None when dropped."""
        self._seq += 1
        if self.drop_prob > 0 and self.rng.random() < self.drop_prob:
            return None
        when = at + self.latency_s
        heapq.heappush(self._queues.setdefault(recipient, []), (when, self._seq, msg))
        return when

    def deliver_due(self, recipient: str, now: float) -> list[dict]:
        q = self._queues.get(recipient)
        out = []
        while q and q[0][0] <= now + 1e-9:
            out.append(heapq.heappop(q)[2])
        return out

    def pending(self) -> int:
        return sum(len(q) for q in self._queues.values())


def channel_send(channel: CommsChannel, msg: dict, recipient: str, at: float) -> float | None:
    return channel.send(msg, recipient, at)


# -- reports ---------------------------------------------------------------------

@dataclass
class TaskRow:
    task: str
    added_s: float
    finished_s: float | None
    execution_s: float | None
    agent: str | None
    status: str


@dataclass
class MissionReport:
    duration_s: float
    total_distance_m: float
    n_agents: int
    n_inspections: int
    rows: list[TaskRow]
    per_agent_distance: dict[str, float]
    complete: bool
    capped: bool

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "duration_s": self.duration_s,
            "total_distance_m": self.total_distance_m,
            "n_agents": self.n_agents,
            "n_inspections": self.n_inspections,
            "complete": self.complete,
            "capped": self.capped,
            "per_agent_distance": self.per_agent_distance,
            "tasks": [vars(r) for r in self.rows],
        }


def metrics(events: list[dict]) -> MissionReport:
    """Build the mission report from the event log: per-task lifecycle rows
    in the field-report column schema, plus distance totals integrated from
    telemetry."""
    added: dict[str, float] = {}
    order: list[str] = []
    first_alloc: dict[str, float] = {}
    finished: dict[str, float] = {}
    by_agent: dict[str, str] = {}
    unserviceable: set[str] = set()
    last_pose: dict[str, tuple] = {}
    dist: dict[str, float] = {}
    duration = 0.0
    capped = False
    agents_seen: set[str] = set()

    for e in events:
        kind = e["kind"]
        if kind == "task_added":
            added[e["task"]] = e["t"]
            order.append(e["task"])
        elif kind == "task_assigned":
            first_alloc.setdefault(e["task"], e["t"])
        elif kind == "task_completed":
            finished[e["task"]] = e["t"]
            by_agent[e["task"]] = e["agent"]
        elif kind == "task_unserviceable":
            unserviceable.add(e["task"])
        elif kind == "telemetry":
            a = e["agent"]
            agents_seen.add(a)
            p = tuple(e["pose"])
            if a in last_pose:
                dist[a] = dist.get(a, 0.0) + math.dist(last_pose[a], p)
            last_pose[a] = p
        elif kind == "mission_end":
            duration = e["t"]
            capped = e["reason"] == "cap"

    rows = []
    for tid in order:
        fin = finished.get(tid)
        if fin is not None:
            exec_s = round(fin - max(added[tid], first_alloc.get(tid, added[tid])), 9)
            status = "completed"
        else:
            exec_s = None
            status = "unserviceable" if tid in unserviceable else "incomplete"
        rows.append(TaskRow(task=tid, added_s=added[tid], finished_s=fin,
                            execution_s=exec_s, agent=by_agent.get(tid), status=status))
    total = round(sum(dist.values()), 6)
    return MissionReport(
        duration_s=duration,
        total_distance_m=total,
        n_agents=len(agents_seen),
        n_inspections=len(finished),
        rows=rows,
        per_agent_distance={a: round(d, 6) for a, d in sorted(dist.items())},
        complete=bool(rows) and all(r.status == "completed" for r in rows) and not capped,
        capped=capped,
    )


def report_text(report: MissionReport) -> str:
    """Plain-text table mirroring the field-report layout for eyeball
    comparison."""
    lines = [
        f"Mission duration        {report.duration_s:g} s",
        f"Total distance covered  {report.total_distance_m:.1f} m",
        f"Number of agents        {report.n_agents}",
        f"Number of inspections   {report.n_inspections}",
        "",
        f"{'Task':<8}{'Added [s]':>10}{'Finished [s]':>14}{'Execution Time [s]':>20}{'Agent':>8}",
    ]
    for r in report.rows:
        fin = f"{r.finished_s:g}" if r.finished_s is not None else r.status
        ex = f"{r.execution_s:g}" if r.execution_s is not None else "-"
        lines.append(f"{r.task:<8}{r.added_s:>10g}{fin:>14}{ex:>20}{r.agent or '-':>8}")
    return "\n".join(lines) + "\n"


def events_to_ndjson(events: list[dict]) -> str:
    header = {"kind": "log_header", "format_version": FORMAT_VERSION}
    return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n"
                   for e in [header] + events)


# -- the mission loop -------------------------------------------------------------

class Mission:
    """Deterministic fixed-step mission run. Operator commands are queued and
    applied between steps; reads should use snapshot()."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.grid = scenario.grid
        self.dfield = compute_distance_field(self.grid)
        self.timing = scenario.timing
        self.auctioneer = Auctioneer([a.id for a in scenario.agents])
        self.channel = CommsChannel(scenario.comms.drop_prob, scenario.comms.latency_s,
                                    random.Random(f"{scenario.seed}:channel"))
        lib = scenario.library or _default_library()
        cfg = AgentConfig(
            goal_tolerance=scenario.timing.goal_tolerance,
            dwell_time=scenario.timing.dwell_time,
            idle_timeout=scenario.timing.idle_timeout,
            takeoff_height=scenario.timing.takeoff_height,
            tracking=TrackingModel(max_deviation=scenario.max_deviation),
        )
        self.agents = [
            AgentSim(a.id, a.start, a.yaw, a.speed, a.home, self.grid, self.dfield,
                     scenario.planner, cfg, lib, seed=scenario.seed)
            for a in scenario.agents
        ]
        self.events: list[dict] = []
        self.step_idx = 0
        self.t = 0.0
        self.done = False
        self.capped = False
        self._pending: list[tuple[str, TaskSpec]] = []
        self._lock = threading.Lock()
        self._injections = list(scenario.injections)
        self._next_announce = 0.0
        self._new_bids = False
        self._op_seq = 0
        self.base_telemetry_last_step: list[dict] = []
        for spec in scenario.tasks:
            self._add_task(spec, 0.0)

    # -- operator interface ----------------------------------------------------

    def inject_task(self, kind: str, location) -> str:
        """Queue a task for the next step boundary; validated now. Returns
        the assigned task id."""
        if self.done:
            raise InjectError("mission already finished")
        loc = tuple(float(c) for c in location)
        if not self.grid.contains_point(loc):
            raise InjectError(f"location {loc} is outside the grid")
        if self.grid.is_occupied(self.grid.world_to_grid(loc)):
            raise InjectError(f"location {loc} is inside an occupied voxel")
        with self._lock:
            self._op_seq += 1
            tid = f"OP{self._op_seq}"
            self._pending.append((tid, TaskSpec(id=tid, kind=kind, location=loc)))
        return tid

    # -- internals ----------------------------------------------------------------

    def _add_task(self, spec: TaskSpec, at: float) -> None:
        self.auctioneer.add_task(Task(id=spec.id, kind=spec.kind,
                                      location=spec.location, added_at=at))
        self._log({"kind": "task_added", "t": at, "task": spec.id,
                   "task_kind": spec.kind, "location": [round(c, 6) for c in spec.location]})

    def _log(self, event: dict) -> None:
        self.events.append(event)

    def _send(self, msg: dict, recipient: str, at: float) -> None:
        when = self.channel.send(msg, recipient, at)
        if when is None:
            self._log({"kind": "drop", "t": at, "msg": msg["type"], "to": recipient})

    def step(self) -> list[dict]:
        """Advance the mission by one dt. Returns the events of this step."""
        if self.done:
            return []
        t = self.t
        n_before = len(self.events)

        if t >= self.timing.time_cap - 1e-9:
            self.capped = True
            self.done = True
            self._log({"kind": "mission_end", "t": t, "reason": "cap"})
            return self.events[n_before:]

        # 1. operator commands, serialized between steps
        with self._lock:
            pending, self._pending = self._pending, []
        for _, spec in pending:
            self._add_task(spec, t)

        # 2. scripted injections due now
        while self._injections and self._injections[0][1] <= t + 1e-9:
            spec, _ = self._injections.pop(0)
            self._add_task(spec, t)

        # 3. auctioneer consumes delivered messages
        self.base_telemetry_last_step = []
        for msg in self.channel.deliver_due("base", t):
            if msg["type"] == "bid":
                bids = [Bid(agent_id=msg["agent"], task_id=b["task"], cost=b["cost"])
                        for b in msg["bids"]]
                before = {tid for tid, task in self.auctioneer.tasks.items()
                          if task.status is TaskStatus.UNSERVICEABLE}
                if self.auctioneer.record_bids(msg["agent"], msg["round"], bids, t):
                    self._new_bids = True
                for tid, task in self.auctioneer.tasks.items():
                    if task.status is TaskStatus.UNSERVICEABLE and tid not in before:
                        self._log({"kind": "task_unserviceable", "t": t, "task": tid})
            elif msg["type"] == "telemetry":
                self.base_telemetry_last_step.append(msg)
                newly = self.auctioneer.record_completions(msg["agent"], msg["completed"], t)
                for tid in newly:
                    self._log({"kind": "task_finished", "t": t, "task": tid,
                               "agent": msg["agent"]})

        # 4. allocation stage: run as soon as the round's expected bids are
        # all in (perfect comms resolves within the same step), or at round
        # expiry with whatever survived the channel
        announce_due = t >= self._next_announce - 1e-9
        round_complete = self._new_bids and self.auctioneer.round_bids_complete()
        expired_with_bids = announce_due and bool(self.auctioneer.usable_bids())
        if round_complete or expired_with_bids:
            self._new_bids = False
            assignment, msgs = self.auctioneer.auction_round(self.auctioneer.usable_bids(), t)
            for agent_id, task_id in sorted(assignment.pairs.items()):
                self._log({"kind": "task_assigned", "t": t, "agent": agent_id,
                           "task": task_id, "round": self.auctioneer.round})
            for m in msgs:
                self._send({"type": "allocation", "round": m.round, "agent": m.agent,
                            "task": m.task}, m.agent, t)

        # 5. announcement stage on the round schedule; frozen allocations are
        # re-sent so a lost allocation message heals itself
        if announce_due:
            msg = self.auctioneer.announce(t)
            self._log({"kind": "announce", "t": t, "round": msg["round"],
                       "tasks": [x["id"] for x in msg["tasks"]]})
            for a in self.agents:
                self._send(msg, a.state.id, t)
            for agent_id, task_id in sorted(self.auctioneer.executing.items()):
                self._send({"type": "allocation", "round": msg["round"],
                            "agent": agent_id, "task": task_id}, agent_id, t)
            self._next_announce = round(self._next_announce + self.timing.auction_period, 9)

        # 6. agents step in scenario order
        for a in self.agents:
            inbox = self.channel.deliver_due(a.state.id, t)
            result = a.step(t, self.timing.dt, inbox)
            for e in result.events:
                self._log(dict(e, t=e.get("t", round(t, 9))))
            for m in result.outbox:
                self._send(m, "base", t)

        # 7. termination
        if (not self._injections and not self._pending
                and self.auctioneer.all_terminal()
                and all(a.state.mode is Mode.GROUNDED for a in self.agents)):
            self.done = True
            self._log({"kind": "mission_end", "t": t, "reason": "complete"})

        self.step_idx += 1
        self.t = round(self.step_idx * self.timing.dt, 9)
        return self.events[n_before:]

    def run(self) -> MissionReport:
        while not self.done:
            self.step()
        return self.report()

    def report(self) -> MissionReport:
        return metrics(self.events)

    def snapshot(self) -> dict:
        """Immutable view for the service API: clock, agents, tasks, grid
        summary."""
        tasks = []
        for task in self.auctioneer.tasks.values():
            fin = task.finished_at
            ex = None
            if fin is not None and task.status is TaskStatus.COMPLETED:
                ex = round(fin - max(task.added_at, task.first_assigned_at or task.added_at), 9)
            tasks.append({
                "id": task.id, "kind": task.kind, "location": list(task.location),
                "status": task.status.value, "added_s": task.added_at,
                "finished_s": fin, "execution_s": ex, "agent": task.assigned_agent,
            })
        agents = []
        for a in self.agents:
            s = a.state
            agents.append({
                "id": s.id, "pose": [round(c, 6) for c in s.pose], "yaw": round(s.yaw, 6),
                "mode": s.mode.name.capitalize(), "task": s.current_task.id if s.current_task else None,
                "home": list(s.home) if s.home else None,
            })
        counts = self.grid.state_counts()
        return {
            "format_version": FORMAT_VERSION,
            "clock": self.t,
            "round": self.auctioneer.round,
            "done": self.done,
            "grid": {
                "dims": list(self.grid.dims),
                "resolution": self.grid.resolution,
                "origin": list(self.grid.origin),
                "counts": counts,
            },
            "agents": agents,
            "tasks": tasks,
        }


def _default_library() -> ActionLibrary:
    from importlib.resources import files
    text = files("subterra").joinpath("data/action_library.json").read_text(encoding="utf-8")
    return load_library(text)


def run_mission(scenario: Scenario) -> MissionReport:
    """Execute a scenario to completion (or its time cap)."""
    return Mission(scenario).run()
