"""Simulated aerial agent: kinematic state, the leaf bindings behind every
action and condition of the capability library and the default behavior,
risk-aware bid computation, and per-step execution of the assembled mission
tree.

Each agent is a deterministic state machine stepped by the mission loop;
agents influence each other only through auction messages. A constant-speed
polyline follower with a bounded, seeded lateral deviation on the observed
pose stands in for the real tracking controller.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from . import planner as pl
from .auction import Bid
from .bt import Binding, Status, bind, tick
from .synthesis import ActionLibrary, assemble_mission_tree, default_behavior_tree, generate_behavior_tree
from .world import DistanceField, OutOfBoundsError, VoxelGrid

logger = logging.getLogger(__name__)

GOAL_CONDITION = "At goal point"


class Mode(IntEnum):
    """Flight mode lattice; transitions are monotone within one mission leg
    (ground -> armed -> offboard -> flying) and reset to GROUNDED on landing."""

    GROUNDED = 0
    ARMED = 1
    OFFBOARD = 2
    FLYING = 3


class TaskRef(NamedTuple):
    id: str
    location: tuple[float, float, float]


@dataclass(frozen=True)
class TrackingModel:
    """Bounded lateral deviation of the observed pose from the planned
    polyline, standing in for tracking-controller imperfection."""

    max_deviation: float = 0.0


@dataclass(frozen=True)
class AgentConfig:
    goal_tolerance: float = 0.5
    dwell_time: float = 3.0
    idle_timeout: float = 30.0
    takeoff_height: float = 0.0
    tracking: TrackingModel = TrackingModel()


class PathFollower:
    """Progress along a world polyline. The polyline is anchored at the pose
    the plan was made from, and the exact target point is appended when it
    differs from the final cell center, so joins and arrivals are seamless."""

    def __init__(self, path: pl.Path, target: tuple[float, float, float], goal_key: tuple,
                 min_d: float, anchor: tuple[float, float, float] | None = None):
        pts = list(path.world_waypoints)
        if anchor is not None and math.dist(anchor, pts[0]) > 1e-12:
            pts.insert(0, tuple(anchor))
        if math.dist(pts[-1], target) > 1e-12:
            pts.append(tuple(target))
        self.points = pts
        self.goal_key = goal_key
        self.min_d = min_d
        self.plan = path
        self._seg = 0
        self._along = 0.0
        self._seg_lens = [math.dist(a, b) for a, b in zip(pts, pts[1:])]

    def remaining(self) -> float:
        done = sum(self._seg_lens[:self._seg]) + self._along
        return sum(self._seg_lens) - done

    def position(self) -> tuple[float, float, float]:
        if self._seg >= len(self._seg_lens):
            return self.points[-1]
        a, b = self.points[self._seg], self.points[self._seg + 1]
        f = self._along / self._seg_lens[self._seg] if self._seg_lens[self._seg] > 0 else 1.0
        return tuple(a[i] + (b[i] - a[i]) * f for i in range(3))

    def advance(self, dist: float) -> tuple[float, float, float]:
        while dist > 0 and self._seg < len(self._seg_lens):
            room = self._seg_lens[self._seg] - self._along
            if dist < room:
                self._along += dist
                dist = 0.0
            else:
                dist -= room
                self._seg += 1
                self._along = 0.0
        return self.position()


@dataclass
class AgentState:
    id: str
    pose: tuple[float, float, float]
    yaw: float
    speed: float
    home: tuple[float, float, float] | None
    mode: Mode = Mode.GROUNDED
    current_task: TaskRef | None = None
    path: PathFollower | None = None
    idle_since: float | None = 0.0
    dwell: float = 0.0
    completed: list[str] = field(default_factory=list)


@dataclass
class StepResult:
    events: list[dict]
    outbox: list[dict]


def _dist3(a, b) -> float:
    return math.dist(a, b)


class AgentSim:
    """One simulated agent: owns its state, its bound mission tree, and a
    cached single-source planner result for bidding from the current cell."""

    def __init__(self, agent_id: str, start: tuple[float, float, float], yaw: float,
                 speed: float, home: tuple[float, float, float] | None,
                 grid: VoxelGrid, dfield: DistanceField, params: pl.CostParams,
                 cfg: AgentConfig, lib: ActionLibrary, seed: int = 0):
        if speed <= 0:
            raise ValueError(f"agent {agent_id}: speed must be > 0, got {speed}")
        self.grid = grid
        self.dfield = dfield
        self.params = params
        self.cfg = cfg
        self.state = AgentState(id=agent_id, pose=tuple(start), yaw=yaw,
                                speed=speed, home=tuple(home) if home else None)
        self.known_tasks: dict[str, tuple[float, float, float]] = {}
        self.tree = bind(
            assemble_mission_tree(generate_behavior_tree(lib, GOAL_CONDITION),
                                  default_behavior_tree()),
            self.registry(),
        )
        self._rng = random.Random(f"{seed}:track:{agent_id}")
        self._jitter = (0.0, 0.0)
        occ = np.argwhere(grid.cells == 1)
        self._occ_centers = ((occ + 0.5) * grid.resolution + np.array(grid.origin)
                             if len(occ) else None)
        self._sssp: tuple[tuple, pl._SearchResult] | None = None
        self._board: dict = {"t": 0.0, "dt": 0.0, "state": self.state}
        self._events: list[dict] = []
        self._outbox: list[dict] = []
        self._path_dirty = False
        self._last_announced_round = 0

    # -- planning ------------------------------------------------------------

    def _search_from_here(self) -> pl._SearchResult:
        cell = self.grid.world_to_grid(self.state.pose)
        if self._sssp is None or self._sssp[0] != cell:
            self._sssp = (cell, pl.dijkstra_field(self.grid, self.dfield, cell, self.params))
        return self._sssp[1]

    def _plan_to(self, target: tuple[float, float, float], goal_key: tuple) -> PathFollower:
        goal_cell = self.grid.world_to_grid(target)
        if self.grid.is_occupied(goal_cell):
            raise pl.UnreachableError(f"target cell {goal_cell} is occupied")
        path = pl.extract_path(self._search_from_here(), goal_cell, self.params)
        follower = PathFollower(path, target, goal_key, min_d=0.0, anchor=self.state.pose)
        follower.min_d = self._polyline_clearance(follower.points)
        return follower

    def _polyline_clearance(self, pts) -> float:
        """Minimum distance from the flown polyline (not just its lattice
        points) to any occupied cell center; the tracking-deviation safety
        bound is stated against this."""
        occ = self._occ_centers
        if occ is None:
            return math.inf
        best = float(np.min(np.linalg.norm(occ - np.array(pts[0]), axis=1)))
        for a, b in zip(pts, pts[1:]):
            p = np.array(a)
            seg = np.array(b) - p
            denom = float(seg @ seg)
            if denom == 0.0:
                continue
            t = np.clip((occ - p) @ seg / denom, 0.0, 1.0)
            closest = p + t[:, None] * seg
            best = min(best, float(np.min(np.linalg.norm(occ - closest, axis=1))))
        return best

    def _path_synced(self) -> bool:
        """A stored plan is only followable if the pose is still on it; a
        pose moved by takeoff or landing forces a replan from here."""
        s = self.state
        return s.path is not None and _dist3(s.pose, s.path.position()) <= 1e-9

    def compute_bids(self, tasks: list[dict]) -> list[Bid]:
        """Risk-aware path length to each announced task from the current
        cell; unreachable or out-of-grid tasks produce explicit no-bids."""
        s = self.state
        bids = []
        for t in tasks:
            loc = tuple(t["location"])
            cost = None
            try:
                goal_cell = self.grid.world_to_grid(loc)
                if not self.grid.is_occupied(goal_cell):
                    path = pl.extract_path(self._search_from_here(), goal_cell, self.params)
                    cost = pl.path_length(path)
            except (OutOfBoundsError, pl.UnreachableError) as e:
                logger.info("agent %s: no bid for %s (%s)", s.id, t["id"], e)
            bids.append(Bid(agent_id=s.id, task_id=t["id"], cost=cost))
        return bids

    # -- leaf bindings ---------------------------------------------------------

    def registry(self) -> dict[str, Binding]:
        s = self.state
        cfg = self.cfg

        def current_inspection_completed(board) -> Status:
            return Status.SUCCESS if s.current_task is None else Status.FAILURE

        def at_goal_point(board) -> Status:
            if s.current_task is None:
                return Status.FAILURE
            close = _dist3(s.pose, s.current_task.location) <= cfg.goal_tolerance
            return Status.SUCCESS if close else Status.FAILURE

        def has_path(board) -> Status:
            ok = (s.path is not None and s.current_task is not None
                  and s.path.goal_key == ("task", s.current_task.id)
                  and self._path_synced())
            return Status.SUCCESS if ok else Status.FAILURE

        def is_flying(board) -> Status:
            return Status.SUCCESS if s.mode is Mode.FLYING else Status.FAILURE

        def has_home_location(board) -> Status:
            return Status.SUCCESS if s.home is not None else Status.FAILURE

        def is_armed(board) -> Status:
            return Status.SUCCESS if s.mode >= Mode.ARMED else Status.FAILURE

        def in_offboard_mode(board) -> Status:
            return Status.SUCCESS if s.mode >= Mode.OFFBOARD else Status.FAILURE

        def landed(board) -> Status:
            return Status.SUCCESS if s.mode is Mode.GROUNDED else Status.FAILURE

        def update_path(board) -> Status:
            task = s.current_task
            if task is None:
                return Status.FAILURE
            try:
                s.path = self._plan_to(task.location, ("task", task.id))
            except (OutOfBoundsError, pl.UnreachableError) as e:
                logger.warning("agent %s: cannot plan to task %s: %s", s.id, task.id, e)
                self._events.append({"kind": "path_failed", "agent": s.id, "task": task.id})
                return Status.FAILURE
            self._emit_path_event(("task", task.id))
            return Status.SUCCESS

        def set_home_location(board) -> Status:
            s.home = s.pose
            return Status.SUCCESS

        def arm(board) -> Status:
            if s.mode is Mode.GROUNDED:
                s.mode = Mode.ARMED
            return Status.SUCCESS

        def set_offboard(board) -> Status:
            if s.mode >= Mode.OFFBOARD:
                return Status.SUCCESS
            if s.mode is Mode.ARMED:
                s.mode = Mode.OFFBOARD
                return Status.SUCCESS
            return Status.FAILURE  # must be armed first

        def takeoff(board) -> Status:
            if s.mode is Mode.FLYING:
                return Status.SUCCESS
            if s.mode < Mode.OFFBOARD or s.home is None:
                return Status.FAILURE  # violated mode precondition
            target_z = s.home[2] + cfg.takeoff_height
            reached = self._move_vertical(target_z, board["dt"])
            if reached:
                s.mode = Mode.FLYING
                return Status.SUCCESS
            return Status.RUNNING

        def follow_path(board) -> Status:
            task = s.current_task
            if (task is None or s.path is None or s.path.goal_key != ("task", task.id)
                    or not self._path_synced()):
                return Status.FAILURE  # path invalidated
            s.pose = s.path.advance(s.speed * board["dt"])
            if _dist3(s.pose, task.location) <= cfg.goal_tolerance:
                return Status.SUCCESS
            if s.path.remaining() <= 0:
                return Status.FAILURE  # exhausted without reaching the goal
            return Status.RUNNING

        def hold_position(board) -> Status:
            if s.current_task is not None:
                return Status.RUNNING  # dwelling at the inspection point
            if s.idle_since is not None and board["t"] - s.idle_since >= cfg.idle_timeout - 1e-9:
                return Status.SUCCESS
            return Status.RUNNING

        def over_home(pose) -> bool:
            # anywhere on the home column between ground and hover altitude,
            # so a descent in progress still satisfies the condition
            if s.home is None:
                return False
            if math.hypot(pose[0] - s.home[0], pose[1] - s.home[1]) > cfg.goal_tolerance:
                return False
            z_lo = min(s.home[2], s.home[2] + cfg.takeoff_height) - cfg.goal_tolerance
            z_hi = max(s.home[2], s.home[2] + cfg.takeoff_height) + cfg.goal_tolerance
            return z_lo <= pose[2] <= z_hi

        def fly_to_home(board) -> Status:
            if s.home is None:
                return Status.FAILURE
            if over_home(s.pose):
                return Status.SUCCESS
            hover = (s.home[0], s.home[1], s.home[2] + cfg.takeoff_height)
            if s.path is None or s.path.goal_key != ("home",) or not self._path_synced():
                try:
                    s.path = self._plan_to(hover, ("home",))
                except (OutOfBoundsError, pl.UnreachableError) as e:
                    logger.warning("agent %s: cannot plan home: %s", s.id, e)
                    return Status.FAILURE
                self._emit_path_event(("home",))
            s.pose = s.path.advance(s.speed * board["dt"])
            if over_home(s.pose):
                return Status.SUCCESS
            return Status.RUNNING

        def land(board) -> Status:
            if s.mode is Mode.GROUNDED:
                return Status.SUCCESS
            target_z = s.home[2] if s.home is not None else s.pose[2]
            reached = self._move_vertical(target_z, board["dt"])
            if reached:
                s.mode = Mode.GROUNDED
                s.path = None
                return Status.SUCCESS
            return Status.RUNNING

        return {
            "Current inspection completed?": current_inspection_completed,
            "At goal point": at_goal_point,
            "Has path": has_path,
            "Is flying": is_flying,
            "Has home location": has_home_location,
            "Is armed": is_armed,
            "In OFFBOARD mode": in_offboard_mode,
            "Landed?": landed,
            "Update path": update_path,
            "Set home location": set_home_location,
            "Arm": arm,
            "Set flight mode OFFBOARD": set_offboard,
            "Takeoff": takeoff,
            "Follow path": follow_path,
            "Hold position": hold_position,
            "Fly to home location": fly_to_home,
            "Land": land,
        }

    def _move_vertical(self, target_z: float, dt: float) -> bool:
        x, y, z = self.state.pose
        step = self.state.speed * dt
        dz = target_z - z
        if abs(dz) <= step:
            self.state.pose = (x, y, target_z)
            return True
        self.state.pose = (x, y, z + math.copysign(step, dz))
        return False

    def _emit_path_event(self, goal_key: tuple) -> None:
        f = self.state.path
        self._events.append({
            "kind": "path_set",
            "agent": self.state.id,
            "goal": list(goal_key),
            "waypoints": [[round(c, 6) for c in p] for p in f.points],
            "length_m": round(pl.path_length(f.plan), 6),
            "min_d": round(f.min_d, 6) if math.isfinite(f.min_d) else None,
        })
        self._path_dirty = True

    # -- stepping ---------------------------------------------------------------

    def handle_message(self, msg: dict, t: float) -> None:
        s = self.state
        if msg["type"] == "task_set":
            for entry in msg["tasks"]:
                self.known_tasks[entry["id"]] = tuple(entry["location"])
            self._last_announced_round = msg["round"]
            if s.current_task is None and msg["tasks"]:
                bids = self.compute_bids(msg["tasks"])
                self._outbox.append({
                    "type": "bid",
                    "agent": s.id,
                    "round": msg["round"],
                    "bids": [{"task": b.task_id,
                              "cost": round(b.cost, 9) if b.cost is not None else None}
                             for b in bids],
                })
        elif msg["type"] == "allocation":
            task_id = msg.get("task")
            if task_id is None or task_id in s.completed:
                return
            if s.current_task is not None:
                if s.current_task.id != task_id:
                    # executing pairs are frozen by design; log the attempt
                    self._events.append({"kind": "allocation_ignored", "agent": s.id,
                                         "task": task_id, "current": s.current_task.id})
                return
            if task_id not in self.known_tasks:
                logger.warning("agent %s: allocation for unknown task %s", s.id, task_id)
                return
            s.current_task = TaskRef(task_id, self.known_tasks[task_id])
            s.idle_since = None
            s.dwell = 0.0
            self._events.append({"kind": "task_adopted", "agent": s.id, "task": task_id})

    def step(self, t: float, dt: float, inbox: list[dict]) -> StepResult:
        """Process delivered messages, tick the mission tree once, integrate
        motion, account inspection dwell, and emit telemetry."""
        s = self.state
        self._events = []
        self._outbox = []
        self._path_dirty = False
        for msg in inbox:
            self.handle_message(msg, t)

        self._board["t"] = t
        self._board["dt"] = dt
        tick(self.tree, self._board)

        if s.current_task is not None and _dist3(s.pose, s.current_task.location) <= self.cfg.goal_tolerance:
            s.dwell += dt
            if s.dwell >= self.cfg.dwell_time - 1e-9:
                done = s.current_task
                self._events.append({"kind": "task_completed", "agent": s.id, "task": done.id})
                s.completed.append(done.id)
                s.current_task = None
                s.path = None
                s.dwell = 0.0
                s.idle_since = t

        tele = self._telemetry(t, dt)
        self._events.append(dict(tele, kind="telemetry"))
        self._outbox.append(tele)
        return StepResult(events=self._events, outbox=self._outbox)

    def _observed_pose(self, dt: float) -> tuple[float, float, float]:
        """True pose plus a bounded, slowly wandering lateral offset (the
        tracking-deviation model). The offset crawls at a small fraction of
        the speed so it does not dominate integrated distance."""
        s = self.state
        m = self.cfg.tracking.max_deviation
        if m <= 0 or s.mode is not Mode.FLYING:
            self._jitter = (0.0, 0.0)
            return s.pose
        drift = 0.5 * m * dt
        ox = self._jitter[0] + self._rng.uniform(-drift, drift)
        oy = self._jitter[1] + self._rng.uniform(-drift, drift)
        mag = math.hypot(ox, oy)
        if mag > m:
            ox, oy = ox * m / mag, oy * m / mag
        self._jitter = (ox, oy)
        p = (s.pose[0] + ox, s.pose[1] + oy, s.pose[2])
        try:
            if not self.grid.is_occupied(self.grid.world_to_grid(p)):
                return p
        except OutOfBoundsError:
            pass
        return s.pose

    def _telemetry(self, t: float, dt: float) -> dict:
        s = self.state
        pose = self._observed_pose(dt)
        msg = {
            "type": "telemetry",
            "t": round(t, 9),
            "agent": s.id,
            "pose": [round(c, 6) for c in pose],
            "yaw": round(s.yaw, 6),
            "mode": s.mode.name.capitalize(),
            "task": s.current_task.id if s.current_task else None,
            "completed": list(s.completed),
        }
        if self._path_dirty and s.path is not None:
            msg["path"] = [[round(c, 6) for c in p] for p in s.path.points]
        return msg
