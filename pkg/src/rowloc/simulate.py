"""Deterministic vineyard world generator and sensor simulator.

The generator lays out parallel rows of trunk landmarks with poles at the row
ends and at a fixed stride in between.  The simulator drives a ground-truth
trajectory through the corridors and emits odometry increments, semantically
labelled range/bearing rays and degraded GNSS fixes.  All randomness flows
through numpy Generators split per subsystem (odometry, rays, GNSS) so that
toggling one noise source never perturbs the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import raycast
from .frames import LabeledRay, SensorFrame
from .geometry import Pose2D, wrap_angle
from .semantic_map import BACKGROUND, NO_HIT, POLE, TRUNK, Landmark, WallMap, build_walls


@dataclass
class VineyardSpec:
    """Row layout parameters; defaults give a 10 row block of 16.86 m rows
    spaced 2.50 m apart (footprint about 17.0 m x 22.6 m)."""

    n_rows: int = 10
    row_length: float = 16.86
    row_spacing: float = 2.50
    plant_spacing: float = 1.405
    pole_every: int = 4
    origin: tuple[float, float] = (0.0, 0.0)
    row_axis_yaw: float = 0.0
    plant_jitter: float = 0.0

    def __post_init__(self):
        if self.n_rows < 2:
            raise ValueError("need at least two rows")
        if self.row_length <= 0 or self.row_spacing <= 0:
            raise ValueError("row_length and row_spacing must be positive")
        if not (0 < self.plant_spacing <= self.row_length):
            raise ValueError("plant_spacing must lie in (0, row_length]")
        if self.pole_every < 1:
            raise ValueError("pole_every must be >= 1")
        if self.plant_jitter < 0:
            raise ValueError("plant_jitter must be >= 0")


@dataclass
class GnssNoiseConfig:
    """Degradation model: slowly varying drift plus white noise plus
    occasional multipath-style jump offsets.

    Drift is first-order Gauss-Markov with correlation time ``drift_tau``
    seconds and stationary standard deviation ``drift_sigma``.  Jumps start
    with probability ``jump_prob`` per step, draw a Laplace offset per axis
    with scale ``jump_scale`` and persist for a geometric number of steps
    with mean ``jump_duration_mean``.
    """

    drift_tau: float = 12.0
    drift_sigma: float = 0.75
    white_sigma: float = 1.85
    jump_prob: float = 0.01
    jump_scale: float = 2.2
    jump_duration_mean: float = 8.0

    def __post_init__(self):
        if self.drift_tau < 0:
            raise ValueError("drift_tau must be >= 0")
        if min(self.drift_sigma, self.white_sigma, self.jump_scale) < 0:
            raise ValueError("noise scales must be >= 0")
        if not (0.0 <= self.jump_prob <= 1.0):
            raise ValueError("jump_prob must be a probability")
        if self.jump_duration_mean < 1.0:
            raise ValueError("jump_duration_mean must be >= 1")


@dataclass
class SimConfig:
    """Sensor and noise parameters for frame synthesis."""

    n_beams: int = 64
    r_max: float = 5.0
    range_sigma: float = 0.01
    p_label_miss: float = 0.05
    detdrop_rate: float = 0.0
    clutter_rate: float = 0.5
    k_bg: int = 4
    odom_sigma_d: float = 0.02
    odom_sigma_yaw: float = math.radians(0.5)
    sem_radius: float = 0.15
    gnss_enabled: bool = True
    gnss: GnssNoiseConfig = field(default_factory=GnssNoiseConfig)

    def __post_init__(self):
        if self.n_beams < 1:
            raise ValueError("n_beams must be >= 1")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        for name in ("p_label_miss", "detdrop_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be >= 0")
        if self.k_bg < 1:
            raise ValueError("k_bg must be >= 1")


def generate_vineyard(spec: VineyardSpec, rng: np.random.Generator | None = None) -> WallMap:
    """Lay out landmarks per ``spec`` and chain them into walls.

    Row ends are always poles; interior landmark i is a pole when i is a
    multiple of ``pole_every``.  With ``plant_jitter`` > 0 each position gets
    Gaussian jitter drawn from ``rng`` (a fixed default generator when rng is
    omitted), which keeps distinct rows from being exact translates of each
    other.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n_gaps = max(1, round(spec.row_length / spec.plant_spacing))
    ds = spec.row_length / n_gaps
    cos_a = math.cos(spec.row_axis_yaw)
    sin_a = math.sin(spec.row_axis_yaw)
    landmarks = []
    lm_id = 0
    for r in range(spec.n_rows):
        for i in range(n_gaps + 1):
            ax = spec.row_length if i == n_gaps else i * ds
            ay = r * spec.row_spacing
            if spec.plant_jitter > 0.0:
                jx, jy = rng.normal(0.0, spec.plant_jitter, size=2)
                ax += jx
                ay += jy
            x = spec.origin[0] + cos_a * ax - sin_a * ay
            y = spec.origin[1] + sin_a * ax + cos_a * ay
            klass = POLE if (i % spec.pole_every == 0 or i == n_gaps) else TRUNK
            landmarks.append(Landmark(lm_id, r, klass, (x, y)))
            lm_id += 1
    return build_walls(landmarks, dominant_axis=(cos_a, sin_a))


def _serpentine_pieces(grid, turn_radius):
    """Straight/arc pieces of a serpentine sweep in (along, offset) coords."""
    offsets = grid.row_offsets
    lo, hi = grid.along_lo, grid.along_hi
    centres = [(offsets[i] + offsets[i + 1]) / 2.0 for i in range(len(offsets) - 1)]
    pieces = []
    for i, c in enumerate(centres):
        forward = (i % 2 == 0)
        if forward:
            pieces.append(("line", (lo, c), (hi, c), hi - lo))
        else:
            pieces.append(("line", (hi, c), (lo, c), hi - lo))
        if i + 1 < len(centres):
            gap = centres[i + 1] - c
            radius = gap / 2.0 if turn_radius is None else turn_radius
            if radius > gap / 2.0 + 1e-9:
                raise ValueError(
                    f"corridor gap {gap:.3f} m is narrower than twice the "
                    f"turn radius {radius:.3f} m")
            # Tightest symmetric U-turn between the two centrelines.
            radius = gap / 2.0
            end_along = hi if forward else lo
            centre = (end_along, c + radius)
            pieces.append(("arc", centre, radius, forward, math.pi * radius))
    return pieces


def _pose_on_piece(piece, s):
    kind = piece[0]
    if kind == "line":
        _, p0, p1, length = piece
        f = s / length
        x = p0[0] + f * (p1[0] - p0[0])
        y = p0[1] + f * (p1[1] - p0[1])
        heading = math.atan2(p1[1] - p0[1], p1[0] - p0[0])
        return x, y, heading
    _, centre, radius, forward, length = piece
    sweep = s / radius
    if forward:
        # Left U-turn: angle runs counter-clockwise from -pi/2.
        ang = -math.pi / 2.0 + sweep
        heading = ang + math.pi / 2.0
    else:
        ang = -math.pi / 2.0 - sweep
        heading = ang - math.pi / 2.0
    x = centre[0] + radius * math.cos(ang)
    y = centre[1] + radius * math.sin(ang)
    return x, y, heading


def generate_trajectory(wall_map: WallMap, pattern: str = "serpentine",
                        speed: float = 1.0, dt: float = 0.1,
                        turn_radius: float | None = None,
                        waypoints=None) -> list[Pose2D]:
    """Ground-truth poses swept at constant speed.

    ``serpentine`` walks every corridor in alternating directions joined by
    half-circle headland turns; ``waypoints`` follows the given polyline.
    Consecutive poses are at most ``speed * dt`` apart.
    """
    if speed <= 0 or dt <= 0:
        raise ValueError("speed and dt must be positive")
    if pattern == "serpentine":
        grid = wall_map.corridor_grid()
        pieces = _serpentine_pieces(grid, turn_radius)
        axis, normal = grid.axis, grid.normal
        axis_yaw = math.atan2(axis[1], axis[0])

        def to_world(along, off, heading):
            x = along * axis[0] + off * normal[0]
            y = along * axis[1] + off * normal[1]
            return Pose2D(x, y, wrap_angle(heading + axis_yaw))
    elif pattern == "waypoints":
        if waypoints is None or len(waypoints) < 2:
            raise ValueError("waypoints pattern needs at least two points")
        pieces = []
        for p0, p1 in zip(waypoints, waypoints[1:]):
            length = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
            if length == 0.0:
                raise ValueError("repeated waypoint")
            pieces.append(("line", tuple(p0), tuple(p1), length))

        def to_world(x, y, heading):
            return Pose2D(x, y, wrap_angle(heading))
    else:
        raise ValueError(f"unknown trajectory pattern {pattern!r}")

    total = sum(p[-1] for p in pieces)
    step = speed * dt
    n_samples = int(math.floor(total / step)) + 1
    poses = []
    piece_idx = 0
    piece_start = 0.0
    for k in range(n_samples):
        s = k * step
        while piece_idx + 1 < len(pieces) and s > piece_start + pieces[piece_idx][-1]:
            piece_start += pieces[piece_idx][-1]
            piece_idx += 1
        local = min(s - piece_start, pieces[piece_idx][-1])
        x, y, heading = _pose_on_piece(pieces[piece_idx], local)
        poses.append(to_world(x, y, heading))
    return poses


def degrade_gnss(gt_positions, cfg: GnssNoiseConfig, rng: np.random.Generator,
                 dt: float = 0.1) -> np.ndarray:
    """Apply drift + white + jump noise to ground-truth positions.

    Returns an array of the same shape; the sample spacing ``dt`` sets the
    drift correlation between consecutive fixes.
    """
    pos = np.asarray(gt_positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ValueError("gt_positions must have shape (T, 2)")
    if dt <= 0:
        raise ValueError("dt must be positive")
    T = pos.shape[0]
    if T == 0:
        return pos.copy()

    rho = math.exp(-dt / cfg.drift_tau) if cfg.drift_tau > 0 else 0.0
    innov_sigma = cfg.drift_sigma * math.sqrt(max(0.0, 1.0 - rho * rho))
    drift = np.empty((T, 2))
    drift[0] = rng.normal(0.0, cfg.drift_sigma, size=2)
    innov = rng.normal(0.0, 1.0, size=(T - 1, 2)) * innov_sigma
    for t in range(1, T):
        drift[t] = rho * drift[t - 1] + innov[t - 1]

    white = rng.normal(0.0, cfg.white_sigma, size=(T, 2))

    starts = rng.random(T)
    offsets = rng.laplace(0.0, max(cfg.jump_scale, 1e-300), size=(T, 2))
    durations = rng.geometric(1.0 / cfg.jump_duration_mean, size=T)
    jump = np.zeros((T, 2))
    remaining = 0
    current = np.zeros(2)
    for t in range(T):
        if remaining <= 0 and cfg.jump_prob > 0.0 and starts[t] < cfg.jump_prob:
            current = offsets[t] if cfg.jump_scale > 0 else np.zeros(2)
            remaining = int(durations[t])
        if remaining > 0:
            jump[t] = current
            remaining -= 1
    return pos + drift + white + jump


def beam_bearings(n_beams: int) -> np.ndarray:
    """Evenly spaced sensor-frame bearings covering (-pi, pi]."""
    j = np.arange(1, n_beams + 1, dtype=float)
    return -math.pi + 2.0 * math.pi * j / n_beams


def simulate_frame(wall_map: WallMap, gt_now: Pose2D, gt_prev: Pose2D,
                   cfg: SimConfig, odom_rng: np.random.Generator,
                   ray_rng: np.random.Generator, t: float = 0.0,
                   gnss: tuple[float, float] | None = None) -> SensorFrame:
    """Synthesise one sensor frame at ground-truth pose ``gt_now``.

    Odometry is the true increment plus Gaussian noise.  Each beam is cast
    against the walls: hits get range noise and keep the wall class unless
    the label flips to background (probability ``p_label_miss``) or the
    detection drops out entirely (``detdrop_rate``).  Clear beams and label
    flips become background rays, downsampled to every ``k_bg``-th one;
    clutter appends background rays at random bearings, never beyond the
    first surface along the bearing.  GNSS fixes are produced by
    :func:`degrade_gnss` at the stream level and passed in via ``gnss``.
    """
    dd = math.hypot(gt_now.x - gt_prev.x, gt_now.y - gt_prev.y)
    dyaw = wrap_angle(gt_now.yaw - gt_prev.yaw)
    odom = (dd + odom_rng.normal() * cfg.odom_sigma_d,
            dyaw + odom_rng.normal() * cfg.odom_sigma_yaw)

    phi = beam_bearings(cfg.n_beams)
    rhat, chat = raycast.cast_rays(
        np.array([gt_now.x]), np.array([gt_now.y]), np.array([gt_now.yaw]),
        phi, wall_map.seg_ax, wall_map.seg_ay, wall_map.seg_bx, wall_map.seg_by,
        wall_map.seg_class, cfg.r_max)
    rhat = rhat[0]
    chat = chat[0]

    range_noise = ray_rng.normal(0.0, 1.0, size=cfg.n_beams) * cfg.range_sigma
    flip = ray_rng.random(cfg.n_beams)
    drop = ray_rng.random(cfg.n_beams)

    rays = []
    bg_counter = 0
    for j in range(cfg.n_beams):
        if chat[j] == NO_HIT:
            r = cfg.r_max
            klass = BACKGROUND
        else:
            r = min(max(rhat[j] + range_noise[j], 1e-3), cfg.r_max)
            klass = BACKGROUND if flip[j] < cfg.p_label_miss else int(chat[j])
        if klass == BACKGROUND:
            if bg_counter % cfg.k_bg == 0:
                rays.append(LabeledRay(float(r), float(phi[j]), BACKGROUND))
            bg_counter += 1
        else:
            if drop[j] >= cfg.detdrop_rate:
                rays.append(LabeledRay(float(r), float(phi[j]), klass))

    n_clutter = int(ray_rng.poisson(cfg.clutter_rate))
    if n_clutter > 0:
        cl_phi = -math.pi + ray_rng.random(n_clutter) * 2.0 * math.pi
        cl_frac = np.maximum(ray_rng.random(n_clutter), 1e-9)
        # airborne scatter is occluded by whatever surface the beam would
        # hit, so a clutter return can only be closer than the first wall
        # along its bearing
        cl_true, _ = raycast.cast_rays(
            np.array([gt_now.x]), np.array([gt_now.y]), np.array([gt_now.yaw]),
            cl_phi, wall_map.seg_ax, wall_map.seg_ay, wall_map.seg_bx,
            wall_map.seg_by, wall_map.seg_class, cfg.r_max)
        cl_r = cl_true[0] * cl_frac
        for i in range(n_clutter):
            rays.append(LabeledRay(float(cl_r[i]), float(cl_phi[i]), BACKGROUND))

    return SensorFrame(t=t, odom=odom, rays=rays, gnss=gnss, gt_pose=gt_now)


def simulate_stream(wall_map: WallMap, gt_poses, cfg: SimConfig, seed: int,
                    dt: float = 0.1) -> list[SensorFrame]:
    """Simulate frames along a ground-truth trajectory, split-seeded.

    The same ``seed`` always reproduces the identical frame list bit for bit.
    Frame 0 carries a zero odometry increment so filters can initialise on it.
    """
    seq = np.random.SeedSequence(seed)
    odom_seq, ray_seq, gnss_seq = seq.spawn(3)
    odom_rng = np.random.default_rng(odom_seq)
    ray_rng = np.random.default_rng(ray_seq)
    gnss_rng = np.random.default_rng(gnss_seq)

    gt_poses = list(gt_poses)
    positions = np.array([[p.x, p.y] for p in gt_poses])
    if cfg.gnss_enabled and len(gt_poses) > 0:
        fixes = degrade_gnss(positions, cfg.gnss, gnss_rng, dt)
    else:
        fixes = None

    frames = []
    for k, pose in enumerate(gt_poses):
        gnss = None if fixes is None else (float(fixes[k, 0]), float(fixes[k, 1]))
        if k == 0:
            frame = simulate_frame(wall_map, pose, pose, cfg, odom_rng, ray_rng,
                                   t=0.0, gnss=gnss)
            frame.odom = (0.0, 0.0)
        else:
            frame = simulate_frame(wall_map, pose, gt_poses[k - 1], cfg,
                                   odom_rng, ray_rng, t=k * dt, gnss=gnss)
        frames.append(frame)
    return frames
