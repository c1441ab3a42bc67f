"""Risk-aware voxel path planning.

Per-voxel traversal cost adds an obstacle-proximity risk term and a flat
penalty for unknown space on top of the distance-proportional base cost.
Paths minimize the summed cost of entered cells over the 26-connected grid;
the geometric path length (meters) is what agents bid in the auction.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .world import CellState, DistanceField, GridIndex, VoxelGrid, _OCCUPIED, _UNKNOWN


class PlanError(ValueError):
    pass


class UntraversableError(PlanError):
    pass


class UnreachableError(PlanError):
    """No path exists; carried into bidding as a no-bid."""


@dataclass(frozen=True)
class CostParams:
    """Tuning of the per-voxel traversal cost.

    c_u: flat penalty charged in unknown cells (also scales the proximity risk)
    c_d: cost per meter of travel, > 0 so every move has positive cost
    r:   radius (meters) inside which obstacle proximity is penalized
    """

    c_u: float = 10.0
    c_d: float = 1.0
    r: float = 5.0

    def __post_init__(self):
        for name in ("c_u", "c_d", "r"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise PlanError(f"{name} must be finite, got {v}")
        if self.c_u < 0:
            raise PlanError(f"c_u must be >= 0, got {self.c_u}")
        if self.c_d <= 0:
            raise PlanError(f"c_d must be > 0, got {self.c_d}")
        if self.r <= 0:
            raise PlanError(f"r must be > 0, got {self.r}")


def default_params(resolution: float) -> CostParams:
    """Defaults when a scenario omits planner params: risk dominates near
    walls without forbidding narrow passages."""
    return CostParams(c_u=10.0, c_d=1.0, r=5.0 * resolution)


@dataclass
class Path:
    waypoints: list[GridIndex]
    world_waypoints: list[tuple[float, float, float]]
    total_risk_cost: float
    length_m: float


def voxel_cost(state: CellState, d: float, params: CostParams, step_m: float) -> float:
    """Cost of entering a voxel: proximity risk c_u/(d+1) inside radius r,
    flat c_u for unknown cells, plus c_d per meter of the entering step.
    Operation order matches the planner's vectorized edge weights exactly."""
    if state is CellState.OCCUPIED:
        raise UntraversableError("occupied voxels are untraversable, not costed")
    c_r = params.c_u / (d + 1.0) if d < params.r else 0.0
    c = c_r + (params.c_u if state is CellState.UNKNOWN else 0.0)
    return c + params.c_d * step_m


# 26-connected neighborhood, lexicographic over (di, dj, dk).
_OFFSETS = [(di, dj, dk)
            for di in (-1, 0, 1) for dj in (-1, 0, 1) for dk in (-1, 0, 1)
            if (di, dj, dk) != (0, 0, 0)]
_OFFSET_NORMS = [math.sqrt(di * di + dj * dj + dk * dk) for (di, dj, dk) in _OFFSETS]


@dataclass
class _SearchResult:
    """Single-source Dijkstra output over the flat cell index space."""

    grid: VoxelGrid
    start: GridIndex
    dist: np.ndarray = field(repr=False)
    enter_cost: np.ndarray = field(repr=False)


def _enter_costs(grid: VoxelGrid, dfield: DistanceField, params: CostParams) -> np.ndarray:
    """Static per-cell part of the edge weight: risk + unknown penalty
    (the c_d term depends on the step and is added per edge)."""
    d = dfield.d.reshape(-1)
    cells = grid.cells.reshape(-1)
    risk = np.where(d < params.r, params.c_u / (d + 1.0), 0.0)
    cost = risk + np.where(cells == _UNKNOWN, params.c_u, 0.0)
    cost[cells == _OCCUPIED] = np.inf
    return cost


def dijkstra_field(grid: VoxelGrid, dfield: DistanceField, start: GridIndex,
                   params: CostParams) -> _SearchResult:
    """Cheapest risk-cost from ``start`` to every cell (inf if unreachable)."""
    nx, ny, nz = grid.dims
    if not grid.in_bounds(start):
        raise PlanError(f"start {start} out of range")
    if grid.is_occupied(start):
        raise PlanError(f"start {start} is occupied")

    enter = _enter_costs(grid, dfield, params)
    res = grid.resolution
    n = nx * ny * nz
    dist = np.full(n, np.inf)
    s_flat = (start[0] * ny + start[1]) * nz + start[2]
    dist[s_flat] = 0.0
    # flat-index deltas paired with the step length of each move
    moves = [((di * ny + dj) * nz + dk, norm * res, di, dj, dk)
             for (di, dj, dk), norm in zip(_OFFSETS, _OFFSET_NORMS)]

    heap = [(0.0, s_flat)]
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist[u]:
            continue
        ui, rem = divmod(u, ny * nz)
        uj, uk = divmod(rem, nz)
        for dflat, step, di, dj, dk in moves:
            vi, vj, vk = ui + di, uj + dj, uk + dk
            if not (0 <= vi < nx and 0 <= vj < ny and 0 <= vk < nz):
                continue
            v = u + dflat
            w = enter[v] + params.c_d * step
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return _SearchResult(grid=grid, start=start, dist=dist, enter_cost=enter)


def extract_path(search: _SearchResult, goal: GridIndex, params: CostParams) -> Path:
    """Canonical cheapest path from the search start to ``goal``: walk back
    from the goal, at each cell picking the lexicographically smallest
    predecessor that achieves the optimal cost."""
    grid = search.grid
    nx, ny, nz = grid.dims
    if not grid.in_bounds(goal):
        raise PlanError(f"goal {goal} out of range")
    if grid.is_occupied(goal):
        raise PlanError(f"goal {goal} is occupied")
    g_flat = (goal[0] * ny + goal[1]) * nz + goal[2]
    total = float(search.dist[g_flat])
    if not math.isfinite(total):
        raise UnreachableError(f"no path from {search.start} to {goal}")

    res = grid.resolution
    dist = search.dist
    enter = search.enter_cost
    # step lengths must be associated exactly as in dijkstra_field so the
    # float equality below matches the relaxations that produced dist
    steps = [(off, norm * res) for off, norm in zip(_OFFSETS, _OFFSET_NORMS)]
    rev: list[GridIndex] = [goal]
    cur = goal
    cur_flat = g_flat
    while cur != search.start:
        ci, cj, ck = cur
        best = None
        # cost of entering `cur` from any neighbor: static part + step term
        for (di, dj, dk), step in steps:
            pi, pj, pk = ci + di, cj + dj, ck + dk
            if not (0 <= pi < nx and 0 <= pj < ny and 0 <= pk < nz):
                continue
            p_flat = (pi * ny + pj) * nz + pk
            w = enter[cur_flat] + params.c_d * step
            if dist[p_flat] + w == dist[cur_flat]:
                if best is None or (pi, pj, pk) < best:
                    best = (pi, pj, pk)
        if best is None:
            raise PlanError(f"path reconstruction failed at {cur}")  # pragma: no cover
        rev.append(best)
        cur = best
        cur_flat = (best[0] * ny + best[1]) * nz + best[2]
    waypoints = rev[::-1]
    world = [grid.grid_to_world(ix) for ix in waypoints]
    length = sum(math.dist(a, b) for a, b in zip(world, world[1:]))
    return Path(waypoints=waypoints, world_waypoints=world,
                total_risk_cost=total, length_m=length)


def plan(grid: VoxelGrid, dfield: DistanceField, start: GridIndex, goal: GridIndex,
         params: CostParams) -> Path:
    """Minimum-cost path from start to goal (risk-augmented edge weights,
    cost charged on the entered cell). Deterministic: equal-cost choices
    resolve to the lexicographically smallest predecessor."""
    if not grid.in_bounds(goal):
        raise PlanError(f"goal {goal} out of range")
    if grid.is_occupied(goal):
        raise PlanError(f"goal {goal} is occupied")
    search = dijkstra_field(grid, dfield, start, params)
    return extract_path(search, goal, params)


def path_length(path: Path) -> float:
    """Geometric length in meters; this value is the auction bid."""
    return sum(math.dist(a, b) for a, b in zip(path.world_waypoints, path.world_waypoints[1:]))
