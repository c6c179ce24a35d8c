"""Scattered and mechanical amplitude records to Cartesian rasters."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyGridError, EmptyInputError, IncompleteScanError, MalformedRecordError

MISSING = 0
FILLED_DIRECT = 1
FILLED_INTERPOLATED = 2


@dataclass(frozen=True, eq=False)
class GridSpec:
    origin_x_um: float
    origin_y_um: float
    pitch_um: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.pitch_um > 0:
            raise ValueError("grid pitch must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one node per axis")

    def node_coordinates(self):
        xs = self.origin_x_um + np.arange(self.nx) * self.pitch_um
        ys = self.origin_y_um + np.arange(self.ny) * self.pitch_um
        return xs, ys


@dataclass(frozen=True, eq=False)
class AmplitudeGrid:
    """Raster of amplitudes; ``values[i, j]`` sits at
    ``(origin_x + j * pitch, origin_y + i * pitch)``."""

    origin_x_um: float
    origin_y_um: float
    pitch_um: float
    values: np.ndarray
    state: np.ndarray
    wavelength_nm: float | None = None

    @property
    def ny(self):
        return self.values.shape[0]

    @property
    def nx(self):
        return self.values.shape[1]

    @property
    def spec(self):
        return GridSpec(self.origin_x_um, self.origin_y_um, self.pitch_um, self.nx, self.ny)

    @property
    def missing(self):
        return self.state == MISSING

    def same_geometry(self, other):
        return (self.values.shape == other.values.shape
                and np.isclose(self.pitch_um, other.pitch_um)
                and np.isclose(self.origin_x_um, other.origin_x_um)
                and np.isclose(self.origin_y_um, other.origin_y_um))


def _as_records(records):
    arr = np.asarray(records, dtype=float)
    if arr.size == 0:
        raise EmptyInputError("no records to grid")
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise MalformedRecordError("records must be (x_um, y_um, amplitude) triples")
    if not np.all(np.isfinite(arr[:, :2])):
        raise MalformedRecordError("record coordinates must be finite")
    return arr


def fit_to_grid(records, grid: GridSpec, radius_um=None, wavelength_nm=None) -> AmplitudeGrid:
    """Assign every node the amplitude of its nearest record.

    Nodes whose nearest record lies farther than ``radius_um`` (default one
    pitch) stay missing. Equidistant records resolve to the lowest record
    index. Candidate records come from a k-d tree; the winner among them
    is chosen on exact squared distances.
    """
    arr = _as_records(records)
    radius = grid.pitch_um if radius_um is None else float(radius_um)
    if not radius > 0:
        raise ValueError("radius_um must be positive")
    pts = arr[:, :2]
    xs, ys = grid.node_coordinates()
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    tree = cKDTree(pts)
    # slack so float differences between the tree metric and ours never drop a tie
    slack = 1e-9 * (radius + np.abs(nodes).max() + np.abs(pts).max())
    k = min(2, len(pts))
    dist, nearest = tree.query(nodes, k=k, distance_upper_bound=radius + slack)
    dist = dist.reshape(len(nodes), k)
    nearest = nearest.reshape(len(nodes), k)
    hit = np.isfinite(dist[:, 0])
    second = dist[:, 1] if k == 2 else np.full(len(nodes), np.inf)
    clear = hit & (second > dist[:, 0] + 2 * slack)

    winner = np.full(len(nodes), -1, dtype=np.intp)
    winner[clear] = nearest[clear, 0]
    # near-ties: gather every candidate and decide on exact squared distance
    for n in np.flatnonzero(hit & ~clear):
        cand = np.asarray(tree.query_ball_point(nodes[n], dist[n, 0] + slack), dtype=np.intp)
        d2 = (pts[cand, 0] - nodes[n, 0]) ** 2 + (pts[cand, 1] - nodes[n, 1]) ** 2
        winner[n] = cand[d2 == d2.min()].min()

    values = np.zeros(len(nodes))
    state = np.full(len(nodes), MISSING, dtype=np.uint8)
    has = winner >= 0
    w = winner[has]
    d2 = (pts[w, 0] - nodes[has, 0]) ** 2 + (pts[w, 1] - nodes[has, 1]) ** 2
    ok = np.flatnonzero(has)[d2 <= radius * radius]
    values[ok] = arr[winner[ok], 2]
    state[ok] = FILLED_DIRECT
    shape = (grid.ny, grid.nx)
    return AmplitudeGrid(grid.origin_x_um, grid.origin_y_um, grid.pitch_um,
                         values.reshape(shape), state.reshape(shape), wavelength_nm)


def _fill_between(values, known):
    """Linearly fill missing runs bounded by known entries along axis 1."""
    out = values.copy()
    filled = np.zeros_like(known)
    idx = np.arange(values.shape[1])
    for r in range(values.shape[0]):
        k = np.flatnonzero(known[r])
        if len(k) < 2:
            continue
        inner = ~known[r] & (idx > k[0]) & (idx < k[-1])
        if inner.any():
            out[r, inner] = np.interp(idx[inner], k, values[r, k])
            filled[r, inner] = True
    return out, filled


def _fill_nearest(values, known):
    """Copy the nearest known entry along axis 1 into rows that have one.

    Equidistant neighbours resolve to the lower index.
    """
    out = values.copy()
    filled = np.zeros_like(known)
    for r in range(values.shape[0]):
        k = np.flatnonzero(known[r])
        if len(k) == 0:
            continue
        gaps = np.flatnonzero(~known[r])
        if len(gaps) == 0:
            continue
        pos = np.searchsorted(k, gaps)
        left = k[np.clip(pos - 1, 0, len(k) - 1)]
        right = k[np.clip(pos, 0, len(k) - 1)]
        pick = np.where(np.abs(gaps - left) <= np.abs(right - gaps), left, right)
        out[r, gaps] = values[r, pick]
        filled[r, gaps] = True
    return out, filled


def interpolate_gaps(grid: AmplitudeGrid) -> AmplitudeGrid:
    """Fill missing nodes; filled-direct values are never touched.

    1. missing runs between two filled nodes of a row: linear in x
    2. remaining runs between filled nodes of a column: linear in y
    3. remaining nodes copy the nearest filled node of their row, then
       (for rows still empty) of their column

    Any grid with at least one filled node comes out complete, which makes
    the operation idempotent.
    """
    known = grid.state != MISSING
    if not known.any():
        raise EmptyGridError("grid has no filled nodes to interpolate from")
    values = np.where(known, grid.values, 0.0)
    state = grid.state.copy()

    values, f1 = _fill_between(values, known)
    known = known | f1
    vt, f2 = _fill_between(values.T, known.T)
    values, known = vt.T, known | f2.T
    values, f3 = _fill_nearest(values, known)
    known = known | f3
    vt, f4 = _fill_nearest(values.T, known.T)
    values, known = vt.T, known | f4.T

    state[(grid.state == MISSING) & known] = FILLED_INTERPOLATED
    return replace(grid, values=values, state=state)


def grid_mechanical(records, plan, wavelength_nm=None) -> AmplitudeGrid:
    """Undo the serpentine ordering of a mechanical scan.

    ``records`` is either a sequence of amplitudes or of ``(x, y, amplitude)``
    triples, in acquisition order. Point-count plans whose raster is not
    full leave the trailing nodes of the last row missing.
    """
    arr = np.asarray(records, dtype=float)
    amps = arr[:, 2] if arr.ndim == 2 else arr.ravel()
    expected = plan.pulses_per_wavelength
    if len(amps) != expected:
        raise IncompleteScanError(f"expected {expected} records for this plan, got {len(amps)}")
    nx, ny = plan.shape
    values = np.zeros(nx * ny)
    state = np.full(nx * ny, MISSING, dtype=np.uint8)
    values[:expected] = amps
    state[:expected] = FILLED_DIRECT
    values = values.reshape(ny, nx)
    state = state.reshape(ny, nx)
    values[1::2] = values[1::2, ::-1]
    state[1::2] = state[1::2, ::-1]
    return AmplitudeGrid(0.0, 0.0, plan.pitch_um, values, state, wavelength_nm)


def grid_for_plan(plan) -> GridSpec:
    nx, ny = plan.shape
    return GridSpec(0.0, 0.0, plan.pitch_um, nx, ny)
