"""Planar geometry primitives shared by the map, simulator and filter.

Conventions used throughout the package:

* poses are (x, y, yaw) with yaw in radians, wrapped to (-pi, pi],
* rays carry a unit direction and report hit distances along that direction,
* segments are ordered endpoint pairs; degenerate (zero-length) segments are
  rejected at construction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Determinant threshold below which a ray and a segment are treated as
# parallel.  The batched caster mirrors this value; keep them in sync.
PARALLEL_EPS = 1e-12

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi].

    Exactly -pi maps to +pi so the representative of the cut line is unique.
    Raises ValueError for non-finite input.
    """
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    wrapped = math.pi - (math.pi - theta) % TWO_PI
    if wrapped <= -math.pi:
        # The float modulo can land exactly on 2*pi for tiny negative
        # arguments; fold the result back onto the closed end.
        wrapped += TWO_PI
    return wrapped


def wrap_angle_array(theta: np.ndarray) -> np.ndarray:
    """Vectorised :func:`wrap_angle` for float arrays."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("angles must be finite")
    wrapped = math.pi - np.mod(math.pi - theta, TWO_PI)
    return np.where(wrapped <= -math.pi, wrapped + TWO_PI, wrapped)


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; yaw is wrapped to (-pi, pi] at construction."""

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw], dtype=float)


@dataclass(frozen=True)
class Segment:
    """Line segment between two distinct endpoints ``a`` and ``b``."""

    a: tuple[float, float]
    b: tuple[float, float]

    def __post_init__(self):
        a = (float(self.a[0]), float(self.a[1]))
        b = (float(self.b[0]), float(self.b[1]))
        if a == b:
            raise ValueError(f"degenerate segment at {a}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    def tangent_angle(self) -> float:
        """Direction of the segment from ``a`` to ``b`` in (-pi, pi]."""
        return math.atan2(self.b[1] - self.a[1], self.b[0] - self.a[0])


@dataclass(frozen=True)
class Ray:
    """Half-line from ``origin`` along a unit ``direction``."""

    origin: tuple[float, float]
    direction: tuple[float, float]

    def __post_init__(self):
        o = (float(self.origin[0]), float(self.origin[1]))
        d = (float(self.direction[0]), float(self.direction[1]))
        norm = math.hypot(d[0], d[1])
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, |d| = {norm}")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    @classmethod
    def from_angle(cls, origin: tuple[float, float], angle: float) -> "Ray":
        return cls(origin, (math.cos(angle), math.sin(angle)))


def _intersect_floats(ox, oy, dx, dy, ax, ay, bx, by, r_max):
    """Ray/segment intersection on raw floats.

    Returns the hit distance along the ray, or ``inf`` when there is no hit
    within ``r_max``.  The batched caster in :mod:`rowloc.raycast` duplicates
    this arithmetic operation by operation; any change here must be mirrored
    there to preserve bit-identical results.
    """
    sx = bx - ax
    sy = by - ay
    aox = ax - ox
    aoy = ay - oy
    denom = dx * sy - dy * sx
    if abs(denom) < PARALLEL_EPS:
        # Parallel.  A collinear overlap still counts: report the nearest
        # endpoint that lies ahead of the origin.
        if abs(aox * dy - aoy * dx) < PARALLEL_EPS:
            ta = aox * dx + aoy * dy
            tb = (bx - ox) * dx + (by - oy) * dy
            t = math.inf
            if ta >= 0.0 and ta < t:
                t = ta
            if tb >= 0.0 and tb < t:
                t = tb
            if t <= r_max:
                return t
        return math.inf
    t = (aox * sy - aoy * sx) / denom
    u = (aox * dy - aoy * dx) / denom
    if t >= 0.0 and t <= r_max and u >= 0.0 and u <= 1.0:
        return t
    return math.inf


def ray_segment_intersect(ray: Ray, seg: Segment, r_max: float) -> float | None:
    """Smallest ``t >= 0`` with ``ray.origin + t * direction`` on ``seg``.

    Parameters
    ----------
    ray : Ray
    seg : Segment
    r_max : float
        Maximum distance to consider; hits beyond it are discarded.

    Returns
    -------
    float or None
        Hit distance, or None when the ray misses the segment within r_max.
        Parallel non-collinear pairs never hit; a collinear overlap returns
        the nearest endpoint distance.
    """
    if not (r_max > 0.0):
        raise ValueError(f"r_max must be positive, got {r_max}")
    t = _intersect_floats(
        ray.origin[0], ray.origin[1], ray.direction[0], ray.direction[1],
        seg.a[0], seg.a[1], seg.b[0], seg.b[1], r_max,
    )
    return None if math.isinf(t) else t


def _point_segment_floats(px, py, ax, ay, bx, by):
    """Distance from (px, py) to segment (a, b) on raw floats."""
    sx = bx - ax
    sy = by - ay
    apx = px - ax
    apy = py - ay
    denom = sx * sx + sy * sy
    u = (apx * sx + apy * sy) / denom
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    cx = ax + u * sx - px
    cy = ay + u * sy - py
    return math.hypot(cx, cy)


def point_segment_distance(p: tuple[float, float], seg: Segment) -> tuple[float, float]:
    """Euclidean distance from point ``p`` to ``seg`` plus the segment tangent.

    Returns ``(distance, tangent_angle)`` where the tangent angle is the
    direction of the segment from ``a`` to ``b``.
    """
    d = _point_segment_floats(float(p[0]), float(p[1]),
                              seg.a[0], seg.a[1], seg.b[0], seg.b[1])
    return d, seg.tangent_angle()
