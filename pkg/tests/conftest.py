import json
import random
from pathlib import Path

import pytest

from subterra.world import CellState, VoxelGrid

DATA = Path(__file__).resolve().parents[1] / "src" / "subterra" / "data"
FIELD_ANALOG = DATA / "scenarios" / "field_analog.json"
ACTION_LIBRARY = DATA / "action_library.json"


def make_grid(dims, resolution=1.0, origin=(0.0, 0.0, 0.0), occupied=(), unknown=(),
              default=CellState.FREE):
    g = VoxelGrid.filled(tuple(dims), resolution, tuple(origin), state=default)
    for idx in occupied:
        g.set_state(tuple(idx), CellState.OCCUPIED)
    for idx in unknown:
        g.set_state(tuple(idx), CellState.UNKNOWN)
    return g


def random_grid(rng: random.Random, max_cells=1000, p_occupied=0.15, p_unknown=0.15):
    """Random small grid for oracle comparisons."""
    while True:
        nx = rng.randint(1, 12)
        ny = rng.randint(1, 12)
        nz = rng.randint(1, 4)
        if nx * ny * nz <= max_cells:
            break
    res = rng.choice([0.5, 1.0, 2.0])
    g = VoxelGrid.filled((nx, ny, nz), res, (0.0, 0.0, 0.0), state=CellState.FREE)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                u = rng.random()
                if u < p_occupied:
                    g.set_state((i, j, k), CellState.OCCUPIED)
                elif u < p_occupied + p_unknown:
                    g.set_state((i, j, k), CellState.UNKNOWN)
    return g


def free_cells(grid):
    return [tuple(idx) for idx in zip(*(grid.cells != 1).nonzero())]


@pytest.fixture(scope="session")
def field_analog_scenario_path():
    return FIELD_ANALOG


@pytest.fixture(scope="session")
def action_library_path():
    return ACTION_LIBRARY


@pytest.fixture(scope="session")
def field_analog_run():
    """One shared run of the shipped field-analog mission (events, report,
    wall time); several acceptance criteria read from it."""
    import time

    from subterra.mission import Mission, load_scenario

    mission = Mission(load_scenario(FIELD_ANALOG))
    t0 = time.perf_counter()
    report = mission.run()
    wall = time.perf_counter() - t0
    return mission, report, wall


def write_scenario(tmp_path, grid_doc: dict, scenario_doc: dict, name="scenario"):
    """Write a grid + scenario JSON pair and return the scenario path."""
    grid_path = tmp_path / f"{name}_grid.json"
    grid_path.write_text(json.dumps(grid_doc))
    doc = dict(scenario_doc)
    doc.setdefault("format_version", 1)
    doc["grid"] = grid_path.name
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    return path


def corridor_grid_doc(length=12, width=3, nz=1, resolution=1.0):
    """Free corridor (j < width) with an occupied wall row along j = width;
    the remaining boundaries are grid edges."""
    cells = []
    for i in range(length):
        for k in range(nz):
            for j in range(width):
                cells.append({"index": [i, j, k], "state": "free"})
            cells.append({"index": [i, width, k], "state": "occupied"})
    return {"dims": [length, width + 1, nz], "resolution": resolution,
            "origin": [0.0, 0.0, 0.0], "cells": cells}
