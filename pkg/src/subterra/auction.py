"""Central auctioneer: time-varying task pool, announcement/bidding/allocation
rounds, the cost-to-profit transform, and an exact solver for the one-task-
per-agent assignment program (maximize total profit subject to at most one
task per agent and one agent per task).

The auctioneer is a single logical actor: callers feed it messages and clock
ticks in a fixed order; it returns the wire messages to send. Executing
agents do not bid and their tasks are not re-announced.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

logger = logging.getLogger(__name__)

PROFIT_OFFSET = 1.0   # delta added after order reversal; any positive value works
BID_FRESH_ROUNDS = 2  # bids older than this many announcement rounds are discarded
MAX_SOLVER_TASKS = 22  # subset-DP guard; desk-scale pools stay far below


class TaskStatus(Enum):
    PENDING = "pending"
    ASSIGNED = "assigned"
    COMPLETED = "completed"
    UNSERVICEABLE = "unserviceable"


@dataclass
class Task:
    id: str
    kind: str
    location: tuple[float, float, float]
    added_at: float
    status: TaskStatus = TaskStatus.PENDING
    assigned_agent: str | None = None
    first_assigned_at: float | None = None
    finished_at: float | None = None


@dataclass(frozen=True)
class Bid:
    agent_id: str
    task_id: str
    cost: float | None  # path length in meters; None marks an explicit no-bid

    def __post_init__(self):
        if self.cost is not None and self.cost < 0:
            raise ValueError(f"bid cost must be >= 0, got {self.cost}")


@dataclass
class ProfitMatrix:
    """Order-reversed bid costs on the bipartite edge set E. Agents and tasks
    are kept in sorted-id order so solver tie-breaking is reproducible."""

    agents: list[str]
    tasks: list[str]
    rho: dict[tuple[str, str], float] = field(default_factory=dict)


@dataclass
class Assignment:
    pairs: dict[str, str]  # agent id -> task id
    objective: float


def profits_from_costs(bids: list[Bid]) -> ProfitMatrix:
    """rho = (C_max - c) + offset with C_max the largest finite bid of the
    round. Reverses the cost order and keeps every feasible pair strictly
    profitable, so the solver matches as many agents as possible. No-bid
    pairs are excluded from the edge set."""
    finite = [b for b in bids if b.cost is not None]
    agents = sorted({b.agent_id for b in finite})
    tasks = sorted({b.task_id for b in finite})
    if not finite:
        return ProfitMatrix(agents=agents, tasks=tasks)
    c_max = max(b.cost for b in finite)
    rho = {}
    for b in finite:
        rho[(b.agent_id, b.task_id)] = (c_max - b.cost) + PROFIT_OFFSET
    return ProfitMatrix(agents=agents, tasks=tasks, rho=rho)


def solve_assignment(profits: ProfitMatrix) -> Assignment:
    """Exact maximizer of total profit under the two at-most-one constraint
    families. Subset DP over tasks; among optima, prefers the assignment that
    is lexicographically smallest in (agent index, task index) order, with
    assigning preferred over leaving an agent idle."""
    agents = profits.agents
    tasks = profits.tasks
    if not agents or not tasks:
        return Assignment(pairs={}, objective=0.0)
    if len(tasks) > MAX_SOLVER_TASKS:
        raise ValueError(f"assignment instance too large: {len(tasks)} tasks")

    task_bit = {t: 1 << i for i, t in enumerate(tasks)}
    # edges[i] = [(task index, task id, rho)] sorted by task index
    edges: list[list[tuple[int, str, float]]] = []
    for a in agents:
        row = [(ti, t, profits.rho[(a, t)])
               for ti, t in enumerate(tasks) if (a, t) in profits.rho]
        edges.append(row)

    @lru_cache(maxsize=None)
    def best(i: int, used: int) -> float:
        if i == len(agents):
            return 0.0
        value = best(i + 1, used)  # leave agent i unassigned
        for ti, t, rho in edges[i]:
            if not used & (1 << ti):
                value = max(value, rho + best(i + 1, used | (1 << ti)))
        return value

    pairs: dict[str, str] = {}
    objective = best(0, 0)
    used = 0
    total = objective
    for i, a in enumerate(agents):
        chosen = None
        for ti, t, rho in edges[i]:  # smallest task index first
            if not used & (1 << ti):
                sub = best(i + 1, used | (1 << ti))
                if rho + sub == total:
                    chosen = (ti, t, sub)
                    break
        if chosen is None:
            # leaving i unassigned achieves the optimum
            total = best(i + 1, used)
            continue
        ti, t, sub = chosen
        pairs[a] = t
        used |= 1 << ti
        total = sub
    best.cache_clear()
    return Assignment(pairs=pairs, objective=objective)


@dataclass
class AllocationMsg:
    round: int
    agent: str
    task: str | None


class Auctioneer:
    """Owns the task pool and runs the three auction stages. All interaction
    is via announce()/auction_round()/record_* calls made serially on the
    mission timeline."""

    def __init__(self, agent_ids: list[str]):
        self.agent_ids = list(agent_ids)
        self.tasks: dict[str, Task] = {}
        self.round = 0
        self.executing: dict[str, str] = {}  # agent id -> task id, frozen until completion
        self._no_bids: dict[str, set[str]] = {}  # task id -> agents that explicitly no-bid
        self._fresh_bids: dict[str, tuple[int, list[Bid]]] = {}  # agent id -> (round, bids)
        self._expected_bidders: set[str] = set()  # idle agents announced to this round
        self._round_bidders: set[str] = set()

    # -- pool --------------------------------------------------------------

    def add_task(self, task: Task) -> None:
        if task.id in self.tasks:
            raise ValueError(f"duplicate task id '{task.id}'")
        self.tasks[task.id] = task

    def pending_tasks(self) -> list[Task]:
        return [t for t in self.tasks.values() if t.status is TaskStatus.PENDING]

    def all_terminal(self) -> bool:
        return all(t.status in (TaskStatus.COMPLETED, TaskStatus.UNSERVICEABLE)
                   for t in self.tasks.values())

    # -- stages --------------------------------------------------------------

    def announce(self, at: float) -> dict:
        """Announcement stage: list the pending tasks for a new round.
        Assigned tasks are excluded while their executor is live."""
        self.round += 1
        pending = self.pending_tasks()
        self._expected_bidders = (set(self.agent_ids) - set(self.executing)) if pending else set()
        self._round_bidders = set()
        return {
            "type": "task_set",
            "round": self.round,
            "tasks": [{"id": t.id, "kind": t.kind, "location": list(t.location)}
                      for t in pending],
        }

    def round_bids_complete(self) -> bool:
        """True once every idle agent announced to this round has answered;
        the allocation stage may then run without waiting for the round to
        expire. Lost bids simply leave the round incomplete."""
        return self._round_bidders >= self._expected_bidders

    def record_bids(self, agent_id: str, round_no: int, bids: list[Bid], at: float) -> bool:
        """Bidding stage intake. Drops bids from executing agents, for
        unknown tasks, and stale rounds. Returns True if anything usable
        landed (a cue to re-run allocation)."""
        if self.round - round_no >= BID_FRESH_ROUNDS:
            logger.info("dropping stale bids from %s (round %d, now %d)", agent_id, round_no, self.round)
            return False
        if agent_id in self.executing:
            logger.info("ignoring bids from executing agent %s", agent_id)
            return False
        if round_no == self.round:
            self._round_bidders.add(agent_id)
        kept = []
        for b in bids:
            if b.task_id not in self.tasks:
                logger.warning("dropping bid from %s for unknown task %s", agent_id, b.task_id)
                continue
            kept.append(b)
            if b.cost is None:
                self._note_no_bid(b.task_id, agent_id, at)
        self._fresh_bids[agent_id] = (round_no, kept)
        return any(b.cost is not None for b in kept)

    def _note_no_bid(self, task_id: str, agent_id: str, at: float) -> None:
        marks = self._no_bids.setdefault(task_id, set())
        marks.add(agent_id)
        task = self.tasks[task_id]
        if task.status is TaskStatus.PENDING and marks >= set(self.agent_ids):
            task.status = TaskStatus.UNSERVICEABLE
            task.finished_at = None
            logger.warning("task %s unserviceable: no agent can reach it", task_id)

    def usable_bids(self) -> list[Bid]:
        """Finite bids from idle agents on pending tasks, fresh rounds only."""
        out = []
        for agent_id, (round_no, bids) in self._fresh_bids.items():
            if agent_id in self.executing:
                continue
            if self.round - round_no >= BID_FRESH_ROUNDS:
                continue
            for b in bids:
                t = self.tasks.get(b.task_id)
                if t is not None and t.status is TaskStatus.PENDING and b.cost is not None:
                    out.append(b)
        return out

    def auction_round(self, bids: list[Bid], at: float) -> tuple[Assignment, list[AllocationMsg]]:
        """Task allocation stage: transform costs to profits, solve the
        assignment exactly, mark winners Assigned, and emit one allocation
        message per agent (new task, frozen task, or none)."""
        assignment = solve_assignment(profits_from_costs(bids))
        for agent_id, task_id in assignment.pairs.items():
            task = self.tasks[task_id]
            task.status = TaskStatus.ASSIGNED
            task.assigned_agent = agent_id
            if task.first_assigned_at is None:
                task.first_assigned_at = at
            self.executing[agent_id] = task_id
            self._fresh_bids.pop(agent_id, None)
        msgs = [AllocationMsg(round=self.round, agent=a, task=self.executing.get(a))
                for a in self.agent_ids]
        return assignment, msgs

    def record_completions(self, agent_id: str, completed_ids: list[str], at: float) -> list[str]:
        """Mark tasks completed as learned from agent telemetry; idempotent
        under re-delivery. Returns the ids newly marked."""
        newly = []
        for task_id in completed_ids:
            task = self.tasks.get(task_id)
            if task is None or task.status is TaskStatus.COMPLETED:
                continue
            task.status = TaskStatus.COMPLETED
            task.finished_at = at
            if self.executing.get(agent_id) == task_id:
                del self.executing[agent_id]
            newly.append(task_id)
        return newly
