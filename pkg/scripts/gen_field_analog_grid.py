#!/usr/bin/env python3
"""Regenerate the field-analog tunnel grid: a main drift with three branch
tunnels, carved free on two z layers and sealed by occupied walls (every cell
26-adjacent to a corridor is walled so corner-cutting cannot leave the
tunnels). Everything beyond the walls stays unlisted, i.e. unknown."""

import json
from pathlib import Path

DIMS = (60, 40, 2)
RESOLUTION = 1.0

CORRIDORS = [
    # (x range, y range) inclusive; both z layers
    ((2, 57), (19, 21)),   # main drift
    ((14, 16), (4, 18)),   # branch to T1
    ((29, 31), (22, 36)),  # branch to T3
    ((44, 46), (6, 18)),   # branch to T5
]


def main():
    free = set()
    for (x0, x1), (y0, y1) in CORRIDORS:
        for i in range(x0, x1 + 1):
            for j in range(y0, y1 + 1):
                for k in range(DIMS[2]):
                    free.add((i, j, k))

    walls = set()
    for (i, j, k) in free:
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for dk in (-1, 0, 1):
                    n = (i + di, j + dj, k + dk)
                    if n in free:
                        continue
                    if 0 <= n[0] < DIMS[0] and 0 <= n[1] < DIMS[1] and 0 <= n[2] < DIMS[2]:
                        walls.add(n)

    cells = [{"index": list(c), "state": "free"} for c in sorted(free)]
    cells += [{"index": list(c), "state": "occupied"} for c in sorted(walls)]
    doc = {"dims": list(DIMS), "resolution": RESOLUTION, "origin": [0.0, 0.0, 0.0],
           "cells": cells}
    out = Path(__file__).resolve().parents[1] / "src/subterra/data/grids/field_analog_grid.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")
    print(f"wrote {out}: {len(free)} free, {len(walls)} occupied of {DIMS[0]*DIMS[1]*DIMS[2]} cells")


if __name__ == "__main__":
    main()
