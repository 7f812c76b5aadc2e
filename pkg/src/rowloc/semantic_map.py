"""Semantic wall maps built from surveyed pole/trunk landmarks.

Landmarks that share a row id are chained into wall segments along the
dominant row axis.  Each wall inherits a semantic class with pole dominance:
a segment with at least one pole endpoint is a pole wall, otherwise a trunk
wall.  The resulting map supports semantic ray casts, nearest-wall queries
and corridor (inter-row band) assignment.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Ray, Segment, _intersect_floats, _point_segment_floats

# Semantic class codes.  BACKGROUND labels rays without a semantic detection;
# NO_HIT is the predicted-class sentinel for rays that clear the map.
BACKGROUND = 0
POLE = 1
TRUNK = 2
NO_HIT = -1

CLASS_NAMES = {POLE: "pole", TRUNK: "trunk", BACKGROUND: "background"}
CLASS_CODES = {name: code for code, name in CLASS_NAMES.items()}


class MapError(ValueError):
    """Raised for malformed map files or degenerate map structure."""


@dataclass(frozen=True)
class Landmark:
    id: int
    row_id: int
    klass: int
    position: tuple[float, float]

    def __post_init__(self):
        if self.klass not in (POLE, TRUNK):
            raise MapError(f"landmark class must be pole or trunk, got {self.klass}")
        object.__setattr__(self, "position",
                           (float(self.position[0]), float(self.position[1])))


@dataclass(frozen=True)
class WallSegment:
    seg: Segment
    klass: int
    row_id: int


RayHit = namedtuple("RayHit", ["range", "klass"])

_CorridorGrid = namedtuple(
    "_CorridorGrid", ["axis", "normal", "row_offsets", "boundaries", "along_lo", "along_hi"])


class WallMap:
    """Immutable landmark + wall container with packed arrays for kernels."""

    def __init__(self, landmarks, walls, dominant_axis):
        self.landmarks = tuple(landmarks)
        self.walls = tuple(walls)
        ax, ay = float(dominant_axis[0]), float(dominant_axis[1])
        norm = math.hypot(ax, ay)
        if norm == 0.0:
            raise MapError("dominant axis must be non-zero")
        self.dominant_axis = (ax / norm, ay / norm)

        n = len(self.walls)
        self.seg_ax = np.array([w.seg.a[0] for w in self.walls], dtype=float)
        self.seg_ay = np.array([w.seg.a[1] for w in self.walls], dtype=float)
        self.seg_bx = np.array([w.seg.b[0] for w in self.walls], dtype=float)
        self.seg_by = np.array([w.seg.b[1] for w in self.walls], dtype=float)
        self.seg_class = np.array([w.klass for w in self.walls], dtype=np.int64)
        self.seg_row = np.array([w.row_id for w in self.walls], dtype=np.int64)
        self.seg_tangent = np.array(
            [w.seg.tangent_angle() for w in self.walls], dtype=float)
        assert self.seg_ax.shape == (n,)
        self._corridor_grid = None

    @property
    def n_walls(self) -> int:
        return len(self.walls)

    def landmark_arrays(self):
        """Packed (x, y, class) arrays over landmarks."""
        x = np.array([lm.position[0] for lm in self.landmarks], dtype=float)
        y = np.array([lm.position[1] for lm in self.landmarks], dtype=float)
        c = np.array([lm.klass for lm in self.landmarks], dtype=np.int64)
        return x, y, c

    def bbox(self):
        """Axis-aligned landmark bounding box (xmin, ymin, xmax, ymax)."""
        if not self.landmarks:
            raise MapError("map has no landmarks")
        xs = [lm.position[0] for lm in self.landmarks]
        ys = [lm.position[1] for lm in self.landmarks]
        return min(xs), min(ys), max(xs), max(ys)

    def corridor_grid(self) -> _CorridorGrid:
        """Row-offset banding used for corridor assignment.

        Rows are sorted by their mean offset along the normal of the dominant
        axis; corridor i is the band between rows i and i+1, with the two
        outer bands extended outward by half the local row spacing.
        """
        if self._corridor_grid is None:
            rows = {}
            for lm in self.landmarks:
                rows.setdefault(lm.row_id, []).append(lm.position)
            if len(rows) < 2:
                raise MapError("corridors are undefined for maps with fewer than two rows")
            axv, ayv = self.dominant_axis
            nx, ny = -ayv, axv
            offsets = sorted(
                float(np.mean([p[0] * nx + p[1] * ny for p in pts]))
                for pts in rows.values())
            offsets = np.asarray(offsets, dtype=float)
            along = np.array(
                [lm.position[0] * axv + lm.position[1] * ayv for lm in self.landmarks])
            bounds = np.empty(len(offsets), dtype=float)
            bounds[0] = offsets[0] - 0.5 * (offsets[1] - offsets[0])
            bounds[1:-1] = offsets[1:-1]
            bounds[-1] = offsets[-1] + 0.5 * (offsets[-1] - offsets[-2])
            self._corridor_grid = _CorridorGrid(
                axis=(axv, ayv), normal=(nx, ny), row_offsets=offsets,
                boundaries=bounds, along_lo=float(along.min()),
                along_hi=float(along.max()))
        return self._corridor_grid

    @property
    def n_corridors(self) -> int:
        return len(self.corridor_grid().row_offsets) - 1


def estimate_dominant_axis(landmarks) -> tuple[float, float]:
    """Principal direction of row-centred landmark positions.

    Positions are centred per row so the spread across rows does not leak
    into the estimate; the sign is fixed to make the axis deterministic.
    """
    rows = {}
    for lm in landmarks:
        rows.setdefault(lm.row_id, []).append(lm.position)
    centred = []
    for pts in rows.values():
        arr = np.asarray(pts, dtype=float)
        centred.append(arr - arr.mean(axis=0))
    pooled = np.vstack(centred)
    cov = pooled.T @ pooled
    _, vecs = np.linalg.eigh(cov)
    ax, ay = vecs[:, -1]
    if ax < 0.0 or (ax == 0.0 and ay < 0.0):
        ax, ay = -ax, -ay
    return float(ax), float(ay)


def build_walls(landmarks, dominant_axis=None) -> WallMap:
    """Chain landmarks into per-row walls ordered along the dominant axis.

    Within a row the landmarks are sorted by their projection onto the axis
    and consecutive pairs become wall segments.  Duplicate positions inside a
    row would create zero-length walls and raise MapError.
    """
    landmarks = list(landmarks)
    if not landmarks:
        raise MapError("cannot build walls from an empty landmark list")
    if dominant_axis is None:
        dominant_axis = estimate_dominant_axis(landmarks)
    ax, ay = dominant_axis
    norm = math.hypot(ax, ay)
    if norm == 0.0:
        raise MapError("dominant axis must be non-zero")
    ax, ay = ax / norm, ay / norm

    rows = {}
    for lm in landmarks:
        rows.setdefault(lm.row_id, []).append(lm)
    walls = []
    for row_id in sorted(rows):
        members = sorted(rows[row_id],
                         key=lambda lm: (lm.position[0] * ax + lm.position[1] * ay, lm.id))
        seen = set()
        for lm in members:
            if lm.position in seen:
                raise MapError(
                    f"duplicate landmark position {lm.position} in row {row_id}")
            seen.add(lm.position)
        for a, b in zip(members, members[1:]):
            klass = POLE if POLE in (a.klass, b.klass) else TRUNK
            walls.append(WallSegment(Segment(a.position, b.position), klass, row_id))
    return WallMap(landmarks, walls, (ax, ay))


def cast_semantic_ray(wall_map: WallMap, ray: Ray, r_max: float) -> RayHit:
    """First wall hit along ``ray`` within ``r_max``.

    Returns RayHit(range, klass); a clear ray returns RayHit(r_max, NO_HIT).
    Ties between walls go to the lowest wall index.
    """
    if not (r_max > 0.0):
        raise ValueError(f"r_max must be positive, got {r_max}")
    ox, oy = ray.origin
    dx, dy = ray.direction
    best_t = math.inf
    best_c = NO_HIT
    for k in range(len(wall_map.walls)):
        t = _intersect_floats(ox, oy, dx, dy,
                              wall_map.seg_ax[k], wall_map.seg_ay[k],
                              wall_map.seg_bx[k], wall_map.seg_by[k], r_max)
        if t < best_t:
            best_t = t
            best_c = int(wall_map.seg_class[k])
    if math.isinf(best_t):
        return RayHit(r_max, NO_HIT)
    return RayHit(best_t, best_c)


def nearest_wall(wall_map: WallMap, p) -> tuple[float, float]:
    """Distance from ``p`` to the closest wall and that wall's tangent angle."""
    if not wall_map.walls:
        raise MapError("map has no walls")
    px, py = float(p[0]), float(p[1])
    best_d = math.inf
    best_h = 0.0
    for k in range(len(wall_map.walls)):
        d = _point_segment_floats(px, py,
                                  wall_map.seg_ax[k], wall_map.seg_ay[k],
                                  wall_map.seg_bx[k], wall_map.seg_by[k])
        if d < best_d:
            best_d = d
            best_h = float(wall_map.seg_tangent[k])
    return best_d, best_h


def corridor_index(wall_map: WallMap, points) -> np.ndarray:
    """Corridor id for each (x, y) point, or -1 outside every corridor.

    A point is inside corridor i when its offset across the rows falls in
    band i and its projection along the rows lies within the landmark extent
    (headland positions map to -1).
    """
    grid = wall_map.corridor_grid()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    off = pts[:, 0] * grid.normal[0] + pts[:, 1] * grid.normal[1]
    along = pts[:, 0] * grid.axis[0] + pts[:, 1] * grid.axis[1]
    idx = np.searchsorted(grid.boundaries, off, side="right") - 1
    valid = (idx >= 0) & (idx <= len(grid.row_offsets) - 2)
    valid &= (along >= grid.along_lo) & (along <= grid.along_hi)
    return np.where(valid, idx, -1).astype(np.int64)


def load_map(path) -> WallMap:
    """Read a landmark CSV (``id,row_id,class,x,y``) and build its walls.

    Lines starting with ``#`` are comments; a ``# axis:`` directive written by
    :func:`save_map` pins the dominant axis so the wall structure round-trips
    exactly.  Malformed lines raise MapError with their line number.
    """
    path = Path(path)
    landmarks = []
    axis = None
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("axis:"):
                    parts = body[len("axis:"):].split()
                    if len(parts) != 2:
                        raise MapError(f"{path}:{lineno}: bad axis directive")
                    axis = (float(parts[0]), float(parts[1]))
                continue
            fields = line.split(",")
            if len(fields) != 5:
                raise MapError(
                    f"{path}:{lineno}: expected 5 fields (id,row_id,class,x,y), "
                    f"got {len(fields)}")
            try:
                lm_id = int(fields[0])
                row_id = int(fields[1])
            except ValueError as exc:
                raise MapError(f"{path}:{lineno}: bad integer field: {exc}") from exc
            token = fields[2].strip().lower()
            if token not in ("pole", "trunk"):
                raise MapError(f"{path}:{lineno}: unknown class {fields[2]!r}")
            try:
                x = float(fields[3])
                y = float(fields[4])
            except ValueError as exc:
                raise MapError(f"{path}:{lineno}: bad coordinate: {exc}") from exc
            landmarks.append(Landmark(lm_id, row_id, CLASS_CODES[token], (x, y)))
    if not landmarks:
        raise MapError(f"{path}: no landmarks found")
    return build_walls(landmarks, dominant_axis=axis)


def save_map(wall_map: WallMap, path) -> None:
    """Write landmarks as CSV; positions use repr so they round-trip exactly."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# id,row_id,class,x,y\n")
        ax, ay = wall_map.dominant_axis
        fh.write(f"# axis: {ax!r} {ay!r}\n")
        for lm in wall_map.landmarks:
            fh.write(f"{lm.id},{lm.row_id},{CLASS_NAMES[lm.klass]},"
                     f"{lm.position[0]!r},{lm.position[1]!r}\n")


def save_walls_csv(wall_map: WallMap, path) -> None:
    """Write the derived wall segments as ``row_id,class,ax,ay,bx,by``."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("row_id,class,ax,ay,bx,by\n")
        for w in wall_map.walls:
            fh.write(f"{w.row_id},{CLASS_NAMES[w.klass]},"
                     f"{w.seg.a[0]!r},{w.seg.a[1]!r},{w.seg.b[0]!r},{w.seg.b[1]!r}\n")
