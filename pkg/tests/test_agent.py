import math

import pytest

from subterra.agent import AgentConfig, AgentSim, Mode, TrackingModel
from subterra.bt import Status
from subterra.planner import CostParams
from subterra.synthesis import load_library_file
from subterra.world import compute_distance_field

from conftest import ACTION_LIBRARY, make_grid

PARAMS = CostParams(c_u=10.0, c_d=1.0, r=2.0)
LIB = load_library_file(ACTION_LIBRARY)


def corridor_agent(length=12, speed=1.0, cfg=None, start=(0.5, 0.5, 0.5)):
    g = make_grid((length, 1, 1))
    f = compute_distance_field(g)
    cfg = cfg or AgentConfig(goal_tolerance=0.5, dwell_time=3.0, idle_timeout=5.0,
                             takeoff_height=0.0)
    return AgentSim("R1", start, 0.0, speed, start, g, f, PARAMS, cfg, LIB, seed=1)


def taskset(*entries, rnd=1):
    return {"type": "task_set", "round": rnd,
            "tasks": [{"id": tid, "kind": "inspect", "location": list(loc)}
                      for tid, loc in entries]}


def allocation(agent, task, rnd=1):
    return {"type": "allocation", "round": rnd, "agent": agent, "task": task}


def run_until(agent, pred, dt=0.1, t0=0.0, inbox=(), max_steps=2000):
    t = t0
    inbox = list(inbox)
    for _ in range(max_steps):
        events = agent.step(t, dt, inbox).events
        inbox = []
        t = round(t + dt, 9)
        if pred(agent, events):
            return t, events
    raise AssertionError("condition never reached")


class TestBindings:
    def test_arm_from_grounded(self):
        a = corridor_agent()
        reg = a.registry()
        assert reg["Arm"]({}) is Status.SUCCESS
        assert a.state.mode is Mode.ARMED

    def test_offboard_requires_armed(self):
        a = corridor_agent()
        reg = a.registry()
        assert reg["Set flight mode OFFBOARD"]({}) is Status.FAILURE
        reg["Arm"]({})
        assert reg["Set flight mode OFFBOARD"]({}) is Status.SUCCESS
        assert a.state.mode is Mode.OFFBOARD

    def test_takeoff_precondition_violation_is_failure(self):
        a = corridor_agent()
        assert a.registry()["Takeoff"]({"dt": 0.1}) is Status.FAILURE

    def test_at_goal_within_tolerance(self):
        a = corridor_agent()
        from subterra.agent import TaskRef
        a.state.current_task = TaskRef("T1", (0.8, 0.5, 0.5))
        assert a.registry()["At goal point"]({}) is Status.SUCCESS  # 0.3 m away
        a.state.current_task = TaskRef("T1", (2.5, 0.5, 0.5))
        assert a.registry()["At goal point"]({}) is Status.FAILURE

    def test_mode_evaluators_agree_with_state(self):
        a = corridor_agent()
        reg = a.registry()
        for mode, armed, flying in [(Mode.GROUNDED, False, False),
                                    (Mode.ARMED, True, False),
                                    (Mode.OFFBOARD, True, False),
                                    (Mode.FLYING, True, True)]:
            a.state.mode = mode
            assert (reg["Is armed"]({}) is Status.SUCCESS) == armed
            assert (reg["Is flying"]({}) is Status.SUCCESS) == flying
            assert (reg["Landed?"]({}) is Status.SUCCESS) == (mode is Mode.GROUNDED)


class TestComputeBids:
    def test_zero_for_current_location(self):
        a = corridor_agent()
        bids = a.compute_bids([{"id": "T1", "location": [0.5, 0.5, 0.5]}])
        assert bids[0].cost == 0.0

    def test_corridor_distance(self):
        a = corridor_agent()
        bids = a.compute_bids([{"id": "T1", "location": [10.5, 0.5, 0.5]}])
        assert bids[0].cost == 10.0

    def test_unreachable_is_no_bid(self):
        g = make_grid((5, 1, 1), occupied=[(2, 0, 0)])
        f = compute_distance_field(g)
        a = AgentSim("R1", (0.5, 0.5, 0.5), 0.0, 1.0, (0.5, 0.5, 0.5), g, f, PARAMS,
                     AgentConfig(), LIB)
        bids = a.compute_bids([{"id": "T1", "location": [4.5, 0.5, 0.5]}])
        assert bids[0].cost is None

    def test_outside_grid_is_no_bid(self):
        a = corridor_agent()
        bids = a.compute_bids([{"id": "T1", "location": [99.0, 0.5, 0.5]}])
        assert bids[0].cost is None


class TestStep:
    def test_taskset_triggers_bid_when_idle(self):
        a = corridor_agent()
        res = a.step(0.0, 0.1, [taskset(("T1", (5.5, 0.5, 0.5)))])
        bid_msgs = [m for m in res.outbox if m["type"] == "bid"]
        assert len(bid_msgs) == 1
        assert bid_msgs[0]["bids"] == [{"task": "T1", "cost": 5.0}]

    def test_executing_agent_does_not_bid(self):
        a = corridor_agent()
        a.step(0.0, 0.1, [taskset(("T1", (5.5, 0.5, 0.5))), allocation("R1", "T1")])
        res = a.step(0.1, 0.1, [taskset(("T2", (3.5, 0.5, 0.5)), rnd=2)])
        assert [m for m in res.outbox if m["type"] == "bid"] == []

    def test_full_task_cycle_completes_after_dwell(self):
        a = corridor_agent()
        a.step(0.0, 0.1, [taskset(("T1", (4.5, 0.5, 0.5))), allocation("R1", "T1")])
        t_done, events = run_until(
            a, lambda ag, ev: any(e["kind"] == "task_completed" for e in ev), t0=0.1)
        done = next(e for e in events if e["kind"] == "task_completed")
        assert done["task"] == "T1"
        # at emission the pose is at the goal and the dwell has elapsed:
        # 4 m of travel minus 0.5 tolerance at 1 m/s, then 3 s of dwell
        assert math.dist(a.state.pose, (4.5, 0.5, 0.5)) <= 0.5
        assert t_done >= 3.5 + 3.0
        assert a.state.current_task is None
        assert "T1" in a.state.completed

    def test_follow_path_progress_strictly_decreases(self):
        a = corridor_agent()
        a.step(0.0, 0.1, [taskset(("T1", (9.5, 0.5, 0.5))), allocation("R1", "T1")])
        a.step(0.1, 0.1, [])
        rem = a.state.path.remaining()
        t = 0.2
        while a.state.path is not None and a.state.path.remaining() > 1.0:
            a.step(t, 0.1, [])
            t = round(t + 0.1, 9)
            new_rem = a.state.path.remaining()
            assert new_rem == pytest.approx(rem - 0.1, abs=1e-9)
            rem = new_rem

    def test_idle_timeout_triggers_fly_home(self):
        cfg = AgentConfig(goal_tolerance=0.5, dwell_time=1.0, idle_timeout=5.0,
                          takeoff_height=0.0)
        a = corridor_agent(cfg=cfg)
        # never allocated, already flying (mid-air start)
        a.state.mode = Mode.FLYING
        a.state.pose = (8.5, 0.5, 0.5)
        a.state.idle_since = 0.0
        poses = []
        t = 0.0
        for _ in range(70):
            a.step(t, 0.1, [])
            poses.append(a.state.pose)
            t = round(t + 0.1, 9)
        # held position until the timeout, then started home
        assert all(p == (8.5, 0.5, 0.5) for p in poses[:49])
        moved_at = next(i for i, p in enumerate(poses) if p != (8.5, 0.5, 0.5))
        assert moved_at * 0.1 >= 5.0 - 0.11
        run_until(a, lambda ag, ev: ag.state.mode is Mode.GROUNDED, t0=t)
        assert math.dist(a.state.pose[:2], (0.5, 0.5)) <= 0.5

    def test_grounded_unallocated_agent_stays_put(self):
        a = corridor_agent()
        for i in range(100):
            a.step(round(i * 0.1, 9), 0.1, [])
        assert a.state.mode is Mode.GROUNDED
        assert a.state.pose == (0.5, 0.5, 0.5)

    def test_midpath_allocation_change_is_ignored_and_logged(self):
        a = corridor_agent()
        a.step(0.0, 0.1, [taskset(("T1", (9.5, 0.5, 0.5)), ("T2", (3.5, 0.5, 0.5)))])
        a.step(0.1, 0.1, [allocation("R1", "T1")])
        a.step(0.2, 0.1, [])
        res = a.step(0.3, 0.1, [allocation("R1", "T2", rnd=2)])
        ignored = [e for e in res.events if e["kind"] == "allocation_ignored"]
        assert ignored == [{"kind": "allocation_ignored", "agent": "R1",
                            "task": "T2", "current": "T1"}]
        assert a.state.current_task.id == "T1"

    def test_takeoff_climbs_to_height(self):
        g = make_grid((4, 1, 3))
        f = compute_distance_field(g)
        cfg = AgentConfig(goal_tolerance=0.5, dwell_time=1.0, idle_timeout=30.0,
                          takeoff_height=2.0)
        a = AgentSim("R1", (0.5, 0.5, 0.5), 0.0, 1.0, (0.5, 0.5, 0.5), g, f, PARAMS, cfg, LIB)
        a.step(0.0, 0.1, [taskset(("T1", (3.5, 0.5, 2.5))), allocation("R1", "T1")])
        t, _ = run_until(a, lambda ag, ev: ag.state.mode is Mode.FLYING, t0=0.1)
        assert a.state.pose[2] == pytest.approx(2.5)
        assert t >= 2.0  # climbed 2 m at 1 m/s

    def test_completed_task_allocation_resend_ignored(self):
        a = corridor_agent()
        a.step(0.0, 0.1, [taskset(("T1", (1.5, 0.5, 0.5))), allocation("R1", "T1")])
        run_until(a, lambda ag, ev: any(e["kind"] == "task_completed" for e in ev), t0=0.1)
        res_t = a.step(100.0, 0.1, [allocation("R1", "T1")])
        assert a.state.current_task is None

    def test_telemetry_schema(self):
        a = corridor_agent()
        res = a.step(0.0, 0.1, [])
        tele = [m for m in res.outbox if m["type"] == "telemetry"]
        assert len(tele) == 1
        msg = tele[0]
        assert msg["agent"] == "R1" and msg["mode"] == "Grounded"
        assert msg["task"] is None and msg["completed"] == []
        assert len(msg["pose"]) == 3


class TestTrackingDeviation:
    def test_observed_pose_bounded(self):
        cfg = AgentConfig(goal_tolerance=0.5, dwell_time=1.0, idle_timeout=30.0,
                          takeoff_height=0.0, tracking=TrackingModel(max_deviation=0.2))
        a = corridor_agent(cfg=cfg)
        a.step(0.0, 0.1, [taskset(("T1", (10.5, 0.5, 0.5))), allocation("R1", "T1")])
        t = 0.1
        max_gap = 0.0
        for _ in range(80):
            res = a.step(t, 0.1, [])
            tele = next(m for m in res.outbox if m["type"] == "telemetry")
            gap = math.dist(tele["pose"], a.state.pose)
            max_gap = max(max_gap, gap)
            assert gap <= 0.2 + 1e-6
            t = round(t + 0.1, 9)

    def test_zero_deviation_reports_true_pose(self):
        a = corridor_agent()
        a.step(0.0, 0.1, [taskset(("T1", (10.5, 0.5, 0.5))), allocation("R1", "T1")])
        res = a.step(0.1, 0.1, [])
        tele = next(m for m in res.outbox if m["type"] == "telemetry")
        assert tuple(tele["pose"]) == tuple(round(c, 6) for c in a.state.pose)
