import math
import random

import pytest

from subterra.planner import (CostParams, UnreachableError, UntraversableError, default_params,
                              path_length, plan, voxel_cost)
from subterra.world import CellState, compute_distance_field

from conftest import make_grid, random_grid, free_cells
from oracles import oracle_cheapest_cost


PARAMS = CostParams(c_u=10.0, c_d=1.0, r=5.0)


class TestVoxelCost:
    def test_risk_zero_beyond_radius(self):
        assert voxel_cost(CellState.FREE, 9.0, PARAMS, 1.0) == 1.0

    def test_free_inside_radius(self):
        assert voxel_cost(CellState.FREE, 1.0, PARAMS, 1.0) == 6.0

    def test_unknown_inside_radius(self):
        assert voxel_cost(CellState.UNKNOWN, 1.0, PARAMS, 1.0) == 16.0

    def test_occupied_raises(self):
        with pytest.raises(UntraversableError):
            voxel_cost(CellState.OCCUPIED, 0.0, PARAMS, 1.0)

    def test_infinite_distance_means_no_risk(self):
        assert voxel_cost(CellState.FREE, math.inf, PARAMS, 2.0) == 2.0

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            CostParams(c_d=0.0)
        with pytest.raises(ValueError):
            CostParams(r=-1.0)
        with pytest.raises(ValueError):
            CostParams(c_u=math.inf)

    def test_default_params_scale_radius_with_resolution(self):
        p = default_params(0.5)
        assert (p.c_u, p.c_d, p.r) == (10.0, 1.0, 2.5)


class TestPlan:
    def test_start_equals_goal(self):
        g = make_grid((3, 3, 1))
        f = compute_distance_field(g)
        p = plan(g, f, (1, 1, 0), (1, 1, 0), PARAMS)
        assert p.waypoints == [(1, 1, 0)]
        assert p.total_risk_cost == 0.0
        assert p.length_m == 0.0

    def test_free_corridor_costs_pure_distance(self):
        g = make_grid((5, 1, 1))
        f = compute_distance_field(g)
        p = plan(g, f, (0, 0, 0), (4, 0, 0), PARAMS)
        assert p.waypoints == [(i, 0, 0) for i in range(5)]
        assert p.length_m == 4.0
        assert p.total_risk_cost == 4.0

    def test_unreachable_raises(self):
        g = make_grid((3, 1, 1), occupied=[(1, 0, 0)])
        f = compute_distance_field(g)
        with pytest.raises(UnreachableError):
            plan(g, f, (0, 0, 0), (2, 0, 0), PARAMS)

    def test_two_gap_wall_prefers_wider_gap(self):
        # wall across x=3 with a 1-cell gap at y=0 and a 3-cell gap at y=4..6
        g = make_grid((7, 8, 1))
        for j in range(8):
            if j not in (0, 4, 5, 6):
                g.set_state((3, j, 0), CellState.OCCUPIED)
        f = compute_distance_field(g)
        params = CostParams(c_u=10.0, c_d=1.0, r=3.0)
        p = plan(g, f, (0, 2, 0), (6, 2, 0), params)
        assert p.total_risk_cost == oracle_cheapest_cost(g, f, (0, 2, 0), (6, 2, 0), params)
        gap_y = [wp[1] for wp in p.waypoints if wp[0] == 3]
        assert all(y in (4, 5, 6) for y in gap_y), "should detour through the wide gap"

    def test_matches_oracle_on_random_grids(self):
        rng = random.Random(7)
        checked = 0
        while checked < 25:
            g = random_grid(rng, max_cells=250)
            cells = free_cells(g)
            if len(cells) < 2:
                continue
            f = compute_distance_field(g)
            start, goal = rng.choice(cells), rng.choice(cells)
            params = CostParams(c_u=rng.choice([1.0, 10.0]), c_d=1.0,
                                r=rng.choice([1.5, 3.0]) * g.resolution)
            expected = oracle_cheapest_cost(g, f, start, goal, params)
            try:
                got = plan(g, f, start, goal, params).total_risk_cost
            except UnreachableError:
                got = math.inf
            assert got == expected
            checked += 1

    def test_deterministic_waypoints(self):
        rng = random.Random(11)
        g = random_grid(rng, max_cells=200, p_occupied=0.1)
        f = compute_distance_field(g)
        cells = free_cells(g)
        start, goal = cells[0], cells[-1]
        try:
            a = plan(g, f, start, goal, PARAMS)
            b = plan(g, f, start, goal, PARAMS)
        except UnreachableError:
            pytest.skip("sampled grid disconnected")
        assert a.waypoints == b.waypoints

    def test_path_invariants(self):
        g = make_grid((6, 6, 2), occupied=[(2, j, k) for j in range(5) for k in range(2)])
        f = compute_distance_field(g)
        p = plan(g, f, (0, 0, 0), (5, 0, 1), PARAMS)
        for a, b in zip(p.waypoints, p.waypoints[1:]):
            assert max(abs(a[i] - b[i]) for i in range(3)) == 1  # grid-adjacent, 26-conn
        assert not any(g.is_occupied(wp) for wp in p.waypoints)
        assert p.length_m == pytest.approx(
            sum(math.dist(a, b) for a, b in zip(p.world_waypoints, p.world_waypoints[1:])))


class TestRiskBehavior:
    def two_gap(self, c_u):
        g = make_grid((7, 8, 1))
        for j in range(8):
            if j not in (0, 4, 5, 6):
                g.set_state((3, j, 0), CellState.OCCUPIED)
        f = compute_distance_field(g)
        params = CostParams(c_u=c_u, c_d=1.0, r=3.0)
        return plan(g, f, (0, 2, 0), (6, 2, 0), params), f

    def test_raising_cu_never_cheapens_or_endangers(self):
        last_cost = None
        last_min_d = None
        for c_u in (0.01, 0.1, 1.0, 5.0, 10.0, 50.0):
            p, f = self.two_gap(c_u)
            min_d = min(f.d_at(wp) for wp in p.waypoints)
            if last_cost is not None:
                assert p.total_risk_cost >= last_cost
                assert min_d >= last_min_d
            last_cost, last_min_d = p.total_risk_cost, min_d

    def test_safe_corridor_has_zero_risk_cost(self):
        # corridor wide enough that the middle row keeps d >= r
        g = make_grid((10, 9, 1), occupied=[(i, 0, 0) for i in range(10)]
                      + [(i, 8, 0) for i in range(10)])
        f = compute_distance_field(g)
        params = CostParams(c_u=10.0, c_d=1.0, r=3.0)
        p = plan(g, f, (0, 4, 0), (9, 4, 0), params)
        assert all(f.d_at(wp) >= params.r for wp in p.waypoints)
        assert p.total_risk_cost == params.c_d * p.length_m


class TestPathLength:
    def test_single_waypoint(self):
        g = make_grid((2, 1, 1))
        f = compute_distance_field(g)
        assert path_length(plan(g, f, (0, 0, 0), (0, 0, 0), PARAMS)) == 0.0

    def test_axis_aligned(self):
        g = make_grid((3, 1, 1))
        f = compute_distance_field(g)
        assert path_length(plan(g, f, (0, 0, 0), (2, 0, 0), PARAMS)) == 2.0

    def test_diagonal_steps(self):
        g = make_grid((3, 3, 1))
        f = compute_distance_field(g)
        p = plan(g, f, (0, 0, 0), (2, 2, 0), PARAMS)
        assert path_length(p) == pytest.approx(2.0 * math.sqrt(2.0))
