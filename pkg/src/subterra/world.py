"""Occupancy voxel world: 3D grid model, world/grid coordinate conversion, and
the obstacle distance field used by the risk-aware planner.

Grids are immutable after construction and safe to share across readers.
All distances are in meters, measured between cell centers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

GridIndex = tuple[int, int, int]
WorldPoint = tuple[float, float, float]

# Internal cell encoding for the numpy lattice.
_FREE, _OCCUPIED, _UNKNOWN = 0, 1, 2

# Finite stand-in for "no obstacle seen yet" during the squared-distance
# passes; must dwarf any real squared cell distance while keeping the
# parabola-intersection arithmetic finite (inf would produce inf-inf = nan).
_EDT_INF = 1.0e12


class CellState(Enum):
    FREE = "free"
    OCCUPIED = "occupied"
    UNKNOWN = "unknown"


_STATE_CODE = {CellState.FREE: _FREE, CellState.OCCUPIED: _OCCUPIED, CellState.UNKNOWN: _UNKNOWN}
_CODE_STATE = {v: k for k, v in _STATE_CODE.items()}


class GridError(ValueError):
    """Base class for grid document and lookup failures."""


class GridParseError(GridError):
    pass


class GridValidationError(GridError):
    pass


class OutOfBoundsError(GridError):
    pass


@dataclass
class VoxelGrid:
    """3D occupancy lattice. ``cells[i, j, k]`` holds one of the internal state
    codes; use :meth:`state_at` for the enum view. ``origin`` is the world
    position of the (0,0,0) cell corner."""

    dims: GridIndex
    resolution: float
    origin: WorldPoint
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        nx, ny, nz = self.dims
        if nx < 1 or ny < 1 or nz < 1:
            raise GridValidationError(f"dims must all be >= 1, got {self.dims}")
        if not (self.resolution > 0):
            raise GridValidationError(f"resolution must be > 0, got {self.resolution}")
        if self.cells.shape != (nx, ny, nz):
            raise GridValidationError(
                f"cells shape {self.cells.shape} does not match dims {self.dims}"
            )

    @classmethod
    def filled(cls, dims: GridIndex, resolution: float, origin: WorldPoint = (0.0, 0.0, 0.0),
               state: CellState = CellState.UNKNOWN) -> "VoxelGrid":
        cells = np.full(dims, _STATE_CODE[state], dtype=np.uint8)
        return cls(dims=tuple(dims), resolution=float(resolution), origin=tuple(origin), cells=cells)

    # -- state access ------------------------------------------------------

    def in_bounds(self, idx: GridIndex) -> bool:
        i, j, k = idx
        nx, ny, nz = self.dims
        return 0 <= i < nx and 0 <= j < ny and 0 <= k < nz

    def state_at(self, idx: GridIndex) -> CellState:
        if not self.in_bounds(idx):
            raise OutOfBoundsError(f"index {idx} outside grid dims {self.dims}")
        return _CODE_STATE[int(self.cells[idx])]

    def is_occupied(self, idx: GridIndex) -> bool:
        return int(self.cells[idx]) == _OCCUPIED

    def set_state(self, idx: GridIndex, state: CellState) -> None:
        # Construction-time helper; grids are treated as immutable once shared.
        if not self.in_bounds(idx):
            raise OutOfBoundsError(f"index {idx} outside grid dims {self.dims}")
        self.cells[idx] = _STATE_CODE[state]

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def state_counts(self) -> dict[str, int]:
        vals, counts = np.unique(self.cells, return_counts=True)
        out = {s.value: 0 for s in CellState}
        for v, c in zip(vals, counts):
            out[_CODE_STATE[int(v)].value] = int(c)
        return out

    # -- coordinates --------------------------------------------------------

    def bounds_min(self) -> WorldPoint:
        return self.origin

    def bounds_max(self) -> WorldPoint:
        ox, oy, oz = self.origin
        nx, ny, nz = self.dims
        r = self.resolution
        return (ox + nx * r, oy + ny * r, oz + nz * r)

    def contains_point(self, p: WorldPoint) -> bool:
        lo, hi = self.bounds_min(), self.bounds_max()
        return all(lo[a] <= p[a] <= hi[a] for a in range(3))

    def world_to_grid(self, p: WorldPoint) -> GridIndex:
        """Index of the cell containing ``p``. Floor convention: boundary
        points belong to the higher-index cell, except on the max face which
        belongs to the last cell."""
        if not self.contains_point(p):
            raise OutOfBoundsError(f"point {p} outside grid bounds {self.bounds_min()}..{self.bounds_max()}")
        idx = []
        for a in range(3):
            f = (p[a] - self.origin[a]) / self.resolution
            i = math.floor(f)
            if i >= self.dims[a]:  # exactly on the max face
                i = self.dims[a] - 1
            idx.append(int(i))
        return tuple(idx)

    def grid_to_world(self, idx: GridIndex) -> WorldPoint:
        """World coordinates of the center of cell ``idx``."""
        if not self.in_bounds(idx):
            raise OutOfBoundsError(f"index {idx} outside grid dims {self.dims}")
        return tuple(self.origin[a] + (idx[a] + 0.5) * self.resolution for a in range(3))


@dataclass
class DistanceField:
    """Per-cell Euclidean distance (meters, center-to-center) to the nearest
    occupied cell. ``inf`` everywhere when the grid has no occupied cell;
    exactly 0 on occupied cells."""

    dims: GridIndex
    resolution: float
    d: np.ndarray = field(repr=False)

    def d_at(self, idx: GridIndex) -> float:
        return float(self.d[idx])

    @property
    def has_obstacles(self) -> bool:
        return bool(np.isfinite(self.d).any())


def load_grid(text: str) -> VoxelGrid:
    """Parse a grid document (UTF-8 JSON). Cells absent from the document
    default to Unknown."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise GridParseError(f"malformed grid document at line {e.lineno} col {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise GridParseError("grid document must be a JSON object")

    for key in ("dims", "resolution"):
        if key not in doc:
            raise GridParseError(f"grid document missing field '{key}'")
    dims = doc["dims"]
    if (not isinstance(dims, list)) or len(dims) != 3 or not all(isinstance(v, int) for v in dims):
        raise GridParseError(f"field 'dims' must be a list of three integers, got {dims!r}")
    resolution = doc["resolution"]
    if not isinstance(resolution, (int, float)) or isinstance(resolution, bool):
        raise GridParseError(f"field 'resolution' must be a number, got {resolution!r}")
    origin = doc.get("origin", [0.0, 0.0, 0.0])
    if (not isinstance(origin, list)) or len(origin) != 3:
        raise GridParseError(f"field 'origin' must be a list of three numbers, got {origin!r}")

    grid = VoxelGrid.filled(tuple(dims), float(resolution), tuple(float(v) for v in origin))

    entries = doc.get("cells", [])
    if not isinstance(entries, list):
        raise GridParseError("field 'cells' must be a list")
    for n, entry in enumerate(entries):
        if not isinstance(entry, dict) or "index" not in entry or "state" not in entry:
            raise GridParseError(f"cells[{n}] must be an object with 'index' and 'state'")
        idx = entry["index"]
        if (not isinstance(idx, list)) or len(idx) != 3 or not all(isinstance(v, int) for v in idx):
            raise GridParseError(f"cells[{n}].index must be a list of three integers, got {idx!r}")
        idx = tuple(idx)
        if not grid.in_bounds(idx):
            raise GridValidationError(f"cells[{n}].index {idx} out of range for dims {tuple(dims)}")
        try:
            state = CellState(entry["state"])
        except ValueError:
            raise GridParseError(
                f"cells[{n}].state must be one of free/occupied/unknown, got {entry['state']!r}"
            ) from None
        grid.set_state(idx, state)
    return grid


def load_grid_file(path) -> VoxelGrid:
    with open(path, encoding="utf-8") as f:
        return load_grid(f.read())


def _edt_1d_sq(f: np.ndarray) -> np.ndarray:
    """Felzenszwalb/Huttenlocher lower-envelope pass: given squared distances
    ``f`` along one line, return min over j of f[j] + (i-j)^2 for each i."""
    n = f.shape[0]
    d = np.empty(n)
    v = [0] * n          # parabola sites
    z = [0.0] * (n + 1)  # envelope boundaries
    k = 0
    z[0], z[1] = -math.inf, math.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = math.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) ** 2 + f[v[k]]
    return d


def compute_distance_field(grid: VoxelGrid) -> DistanceField:
    """Exact Euclidean distance transform over cell centers."""
    occ = grid.cells == _OCCUPIED
    if not occ.any():
        return DistanceField(dims=grid.dims, resolution=grid.resolution,
                             d=np.full(grid.dims, np.inf))
    f = np.where(occ, 0.0, _EDT_INF)
    for axis in range(3):
        f = np.apply_along_axis(_edt_1d_sq, axis, f)
    d = np.sqrt(f) * grid.resolution
    return DistanceField(dims=grid.dims, resolution=grid.resolution, d=d)
