"""Monte Carlo localisation against semantic wall maps.

The filter scores particles with four log-likelihood components:

* semantic rays: per-ray Gaussian range agreement against the predicted wall
  hit of the same class, with fixed penalties for wrong-class and no-hit
  predictions, aggregated as a class-weighted mean over the rays,
* background rays: a one-sided free-space penalty that fires when the map
  predicts a hit closer than the measured background range, folded into the
  same aggregation with its own class weight,
* GNSS: isotropic Gaussian agreement with the current fix,
* corridor prior: proximity to the nearest wall plus row-heading alignment.

Each component is normalised across the particle set with a median/MAD rule
so the fused score is scale-free, then blended with a GNSS weight alpha that
adapts to the semantic detection count.  Weights come from a tempered
softmax; systematic resampling with a KLD-based target count keeps the
particle count adaptive.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from . import raycast
from .geometry import Pose2D, wrap_angle, wrap_angle_array
from .semantic_map import BACKGROUND, NO_HIT, POLE, TRUNK, WallMap

logger = logging.getLogger(__name__)

MAD_CONSISTENCY = 1.4826
MAD_EPS = 1e-9


@dataclass
class FilterConfig:
    """All tunables of the filter; defaults are the reference configuration."""

    n_particles: int = 100
    # Semantic ray term.
    sigma_sem: float = 0.05
    p_miss: float = 4.0
    p_wrong: float = 4.0
    w_pole: float = 1.0
    w_trunk: float = 1.0
    w_background: float = 0.20
    r_max: float = 5.0
    # Point-matching fallback (nearest same-class landmark instead of walls).
    point_matching: bool = False
    sem_radius: float = 0.15
    # GNSS term.
    sigma_gnss: float = 1.1
    alpha_k: float = 4.0
    alpha_min: float = 0.05
    alpha_max: float = 0.95
    alpha_fixed: float | None = None
    use_gnss_init: bool = True
    # Corridor prior.
    lambda_corridor: float = 0.30
    sigma_corridor_d: float = 1.0
    sigma_corridor_h: float = 0.5
    corridor_target_offset: float = 0.0
    # Score normalisation and weighting.
    clip_c: float = 3.0
    temperature: float = 1.0
    # Motion noise.
    motion_sigma_x: float = 0.025
    motion_sigma_y: float = 0.025
    motion_sigma_yaw: float = 0.015
    # Scheduling, resampling and output shaping.
    frame_stride: int = 4
    # Fraction of the current count below which the effective sample size
    # triggers a resample.  Tempered weights over clipped robust scores keep
    # the ESS above roughly 0.55 N no matter how informative the update is,
    # so a conventional 0.5 gate would never fire and the set would stop
    # contracting; 0.9 restores the intended resample-when-informative
    # behaviour while still skipping near-uniform updates.
    ess_threshold: float = 0.9
    kld_bin_xy: float = 0.5
    kld_bin_yaw: float = math.radians(15.0)
    kld_epsilon: float = 0.05
    kld_delta: float = 0.01
    n_min: int = 50
    n_max: int = 500
    smoothing_beta: float = 0.7
    map_circvar_threshold: float = 0.3

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        for name in ("sigma_sem", "sigma_gnss", "temperature", "clip_c",
                     "sigma_corridor_d", "sigma_corridor_h", "r_max",
                     "kld_bin_xy", "kld_bin_yaw", "kld_epsilon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("w_pole", "w_trunk", "w_background", "p_miss", "p_wrong",
                     "motion_sigma_x", "motion_sigma_y", "motion_sigma_yaw",
                     "sem_radius"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not (0.0 <= self.lambda_corridor <= 1.0):
            raise ValueError("lambda_corridor must lie in [0, 1]")
        if not (0.0 <= self.alpha_min <= self.alpha_max <= 1.0):
            raise ValueError("alpha bounds must satisfy 0 <= min <= max <= 1")
        if self.alpha_fixed is not None and not (0.0 <= self.alpha_fixed <= 1.0):
            raise ValueError("alpha_fixed must lie in [0, 1]")
        if self.alpha_k <= 0:
            raise ValueError("alpha_k must be positive")
        if self.frame_stride < 1:
            raise ValueError("frame_stride must be >= 1")
        if not (0.0 < self.ess_threshold <= 1.0):
            raise ValueError("ess_threshold must lie in (0, 1]")
        if not (1 <= self.n_min <= self.n_max):
            raise ValueError("need 1 <= n_min <= n_max")
        if not (0.0 <= self.smoothing_beta < 1.0):
            raise ValueError("smoothing_beta must lie in [0, 1)")
        if not (0.0 < self.kld_delta < 0.5):
            raise ValueError("kld_delta must lie in (0, 0.5)")

    def class_weight(self, klass: int) -> float:
        if klass == POLE:
            return self.w_pole
        if klass == TRUNK:
            return self.w_trunk
        if klass == BACKGROUND:
            return self.w_background
        raise ValueError(f"unknown ray class {klass}")


@dataclass
class ParticleSet:
    """Particle poses (n, 3) with normalised weights (n,)."""

    poses: np.ndarray
    weights: np.ndarray
    alpha: float = 0.0
    n_eff: float = 0.0

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.poses.ndim != 2 or self.poses.shape[1] != 3:
            raise ValueError("poses must have shape (n, 3)")
        if self.weights.shape != (self.poses.shape[0],):
            raise ValueError("weights must have shape (n,)")

    @property
    def n(self) -> int:
        return self.poses.shape[0]


@dataclass
class LikelihoodBreakdown:
    """Per-particle component scores for one measurement update."""

    sem_raw: np.ndarray
    gnss_raw: np.ndarray
    corridor_raw: np.ndarray
    sem_norm: np.ndarray
    gnss_norm: np.ndarray
    corridor_norm: np.ndarray
    fused: np.ndarray
    alpha: float
    n_semantic: int
    n_rays_used: int


def init_particles(wall_map: WallMap, cfg: FilterConfig,
                   rng: np.random.Generator,
                   gnss0: tuple[float, float] | None = None) -> ParticleSet:
    """Spawn the initial particle set.

    With a GNSS fix the particles are Gaussian around it (sigma_gnss) with
    uniform yaw; otherwise they cover the map bounding box uniformly.
    """
    n = cfg.n_particles
    if gnss0 is not None and cfg.use_gnss_init:
        xy = np.asarray(gnss0, dtype=float) + rng.normal(0.0, cfg.sigma_gnss, (n, 2))
    else:
        xmin, ymin, xmax, ymax = wall_map.bbox()
        xy = np.column_stack([rng.uniform(xmin, xmax, n), rng.uniform(ymin, ymax, n)])
    yaw = rng.uniform(-math.pi, math.pi, n)
    poses = np.column_stack([xy, yaw])
    weights = np.full(n, 1.0 / n)
    return ParticleSet(poses, weights, n_eff=float(n))


def predict(pset: ParticleSet, delta_d: float, delta_yaw: float,
            cfg: FilterConfig, rng: np.random.Generator) -> ParticleSet:
    """Propagate particles by an odometry increment plus Gaussian noise.

    The translation is applied along each particle's current yaw before the
    yaw increment, so a zero-noise unit step at yaw 0 moves x by exactly 1.
    """
    n = pset.n
    noise = rng.normal(0.0, 1.0, (n, 3))
    yaw_old = pset.poses[:, 2]
    x = pset.poses[:, 0] + delta_d * np.cos(yaw_old) + noise[:, 0] * cfg.motion_sigma_x
    y = pset.poses[:, 1] + delta_d * np.sin(yaw_old) + noise[:, 1] * cfg.motion_sigma_y
    yaw = wrap_angle_array(yaw_old + delta_yaw + noise[:, 2] * cfg.motion_sigma_yaw)
    return ParticleSet(np.column_stack([x, y, yaw]), pset.weights.copy(),
                       alpha=pset.alpha, n_eff=pset.n_eff)


def _pose_columns(poses: np.ndarray):
    px = np.ascontiguousarray(poses[:, 0])
    py = np.ascontiguousarray(poses[:, 1])
    pyaw = np.ascontiguousarray(poses[:, 2])
    return px, py, pyaw


def _ray_psi_matrix(poses: np.ndarray, r: np.ndarray, phi: np.ndarray,
                    klass: np.ndarray, wall_map: WallMap,
                    cfg: FilterConfig) -> np.ndarray:
    """Per-(particle, ray) log scores before class weighting.

    Semantic rays compare the measured range against the predicted hit of
    the expected class; background rays only penalise free-space violations
    (map predicts a hit strictly closer than the measured range).
    """
    px, py, pyaw = _pose_columns(poses)
    inv_two_var = 1.0 / (2.0 * cfg.sigma_sem * cfg.sigma_sem)
    rhat, chat = raycast.cast_rays(
        px, py, pyaw, np.ascontiguousarray(phi),
        wall_map.seg_ax, wall_map.seg_ay, wall_map.seg_bx, wall_map.seg_by,
        wall_map.seg_class, cfg.r_max)

    semantic_col = klass != BACKGROUND
    dr = r[None, :] - rhat
    psi_match = -(dr * dr) * inv_two_var
    psi_miss = -(cfg.p_miss * cfg.p_miss) * inv_two_var
    psi_wrong = -(cfg.p_wrong * cfg.p_wrong) * inv_two_var
    psi_sem = np.where(chat == klass[None, :], psi_match,
                       np.where(chat == NO_HIT, psi_miss, psi_wrong))

    if cfg.point_matching and semantic_col.any():
        sem_idx = np.flatnonzero(semantic_col)
        lm_x, lm_y, lm_c = wall_map.landmark_arrays()
        rhat_pt, hit_pt = raycast.cast_point_landmarks(
            px, py, pyaw, np.ascontiguousarray(phi[sem_idx]),
            np.ascontiguousarray(klass[sem_idx]),
            lm_x, lm_y, lm_c, cfg.sem_radius, cfg.r_max)
        dpt = r[None, sem_idx] - rhat_pt
        psi_pt = np.where(hit_pt, -(dpt * dpt) * inv_two_var, psi_miss)
        psi_sem[:, sem_idx] = psi_pt

    free_violation = np.maximum(dr, 0.0)
    psi_bg = -(free_violation * free_violation) * inv_two_var
    return np.where(semantic_col[None, :], psi_sem, psi_bg)


def ray_log_scores(poses: np.ndarray, r: np.ndarray, phi: np.ndarray,
                   klass: np.ndarray, wall_map: WallMap, cfg: FilterConfig):
    """Combined sensor term for all particles.

    Rays whose class weight is zero are excluded from the aggregation and
    from the semantic count.  Returns (scores (n,), n_rays_used, n_semantic).
    """
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    klass = np.asarray(klass, dtype=np.int64)
    class_w = np.array([cfg.class_weight(c) for c in klass], dtype=float)
    used = class_w > 0.0
    n = poses.shape[0]
    if not used.any():
        return np.zeros(n), 0, 0
    r_u, phi_u, klass_u, w_u = r[used], phi[used], klass[used], class_w[used]
    psi = _ray_psi_matrix(poses, r_u, phi_u, klass_u, wall_map, cfg)
    scores = (psi * w_u[None, :]).sum(axis=1) / len(r_u)
    n_sem = int(np.count_nonzero(klass_u != BACKGROUND))
    return scores, len(r_u), n_sem


def semantic_log_likelihood(pose: Pose2D, rays, wall_map: WallMap,
                            cfg: FilterConfig) -> float:
    """Class-weighted mean ray score for one pose over the given rays.

    Empty input is neutral (0.0).  Background rays passed here contribute
    their free-space penalty, weighted like any other class.
    """
    if not rays:
        return 0.0
    poses = np.array([[pose.x, pose.y, pose.yaw]])
    r = np.array([ray.r for ray in rays])
    phi = np.array([ray.phi for ray in rays])
    klass = np.array([ray.klass for ray in rays], dtype=np.int64)
    scores, n_used, _ = ray_log_scores(poses, r, phi, klass, wall_map, cfg)
    return float(scores[0]) if n_used else 0.0


def background_log_likelihood(pose: Pose2D, rays, wall_map: WallMap,
                              cfg: FilterConfig) -> float:
    """Free-space consistency score over background rays only."""
    bg = [ray for ray in rays if ray.klass == BACKGROUND]
    return semantic_log_likelihood(pose, bg, wall_map, cfg)


def gnss_log_likelihood(pose: Pose2D, fix, cfg: FilterConfig) -> float:
    """Isotropic Gaussian position agreement with a GNSS fix."""
    dx = pose.x - fix[0]
    dy = pose.y - fix[1]
    return -(dx * dx + dy * dy) / (2.0 * cfg.sigma_gnss * cfg.sigma_gnss)


def _gnss_scores(poses: np.ndarray, fix, sigma: float) -> np.ndarray:
    d = poses[:, :2] - np.asarray(fix, dtype=float)[None, :]
    return -(d * d).sum(axis=1) / (2.0 * sigma * sigma)


def _corridor_scores(poses: np.ndarray, wall_map: WallMap,
                     cfg: FilterConfig) -> np.ndarray:
    px, py, pyaw = _pose_columns(poses)
    dist, tangent = raycast.nearest_wall_batch(
        px, py, wall_map.seg_ax, wall_map.seg_ay, wall_map.seg_bx,
        wall_map.seg_by, wall_map.seg_tangent)
    d = dist - cfg.corridor_target_offset
    d_term = -(d * d) / (2.0 * cfg.sigma_corridor_d * cfg.sigma_corridor_d)
    mis = 1.0 - np.abs(np.cos(pyaw - tangent))
    h_term = -(mis * mis) / (2.0 * cfg.sigma_corridor_h * cfg.sigma_corridor_h)
    return d_term + h_term


def corridor_log_likelihood(pose: Pose2D, wall_map: WallMap,
                            cfg: FilterConfig) -> float:
    """Nearest-wall proximity plus row-heading alignment for one pose."""
    if not wall_map.walls:
        raise ValueError("corridor prior needs a map with walls")
    return float(_corridor_scores(np.array([[pose.x, pose.y, pose.yaw]]),
                                  wall_map, cfg)[0])


def robust_normalize(scores, clip_c: float = 3.0) -> np.ndarray:
    """Centre by the median, scale by the consistency-corrected MAD, clip.

    The epsilon in the denominator keeps degenerate (constant) score vectors
    finite; outliers then saturate at +-clip_c.
    """
    scores = np.asarray(scores, dtype=float)
    med = np.median(scores)
    mad = np.median(np.abs(scores - med))
    scale = MAD_CONSISTENCY * mad + MAD_EPS
    return np.clip((scores - med) / scale, -clip_c, clip_c)


def adaptive_alpha(n_semantic: int, cfg: FilterConfig) -> float:
    """GNSS weight that backs off as semantic detections accumulate."""
    alpha = 1.0 / (1.0 + n_semantic / cfg.alpha_k)
    return float(min(max(alpha, cfg.alpha_min), cfg.alpha_max))


def fuse_scores(gnss_norm, sem_norm, corridor_norm, alpha: float,
                lambda_corridor: float) -> np.ndarray:
    """Blend normalised components into the final per-particle score."""
    sensor = (1.0 - lambda_corridor) * np.asarray(sem_norm) \
        + lambda_corridor * np.asarray(corridor_norm)
    return alpha * np.asarray(gnss_norm) + (1.0 - alpha) * sensor


def softmax_weights(scores, temperature: float = 1.0) -> np.ndarray:
    """Tempered softmax with max subtraction for numerical safety."""
    scores = np.asarray(scores, dtype=float)
    z = np.exp((scores - scores.max()) / temperature)
    return z / z.sum()


def effective_sample_size(weights) -> float:
    """Inverse sum of squared normalised weights."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        return 0.0
    w = w / total
    return float(1.0 / np.square(w).sum())


def _kld_bound(k: int, cfg: FilterConfig) -> float:
    """Sample-count bound for k occupied bins (Wilson-Hilferty chi-square
    approximation at error ``kld_epsilon`` and quantile ``1 - kld_delta``)."""
    if k <= 1:
        return float(cfg.n_min)
    d = k - 1
    z = NormalDist().inv_cdf(1.0 - cfg.kld_delta)
    a = 2.0 / (9.0 * d)
    return d / (2.0 * cfg.kld_epsilon) * (1.0 - a + math.sqrt(a) * z) ** 3


def kld_target_count(poses: np.ndarray, weights: np.ndarray,
                     cfg: FilterConfig, rng: np.random.Generator) -> int:
    """Particle budget from the KLD bound, bins counted over weighted draws.

    Following the KLD-sampling recipe, samples are drawn from the weighted
    posterior one at a time and the occupied-bin count k grows as draws land
    in new (x, y, yaw) grid cells; drawing stops once the sample count
    reaches the chi-square bound for the current k.  Counting bins over
    weight-proportional draws rather than the raw particle array matters: a
    diffuse low-weight tail then no longer inflates the budget, so the set
    can contract once the posterior concentrates.
    """
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    order = rng.choice(len(w), size=cfg.n_max, p=w)
    keys_x = np.floor(poses[order, 0] / cfg.kld_bin_xy).astype(np.int64)
    keys_y = np.floor(poses[order, 1] / cfg.kld_bin_xy).astype(np.int64)
    keys_t = np.floor(poses[order, 2] / cfg.kld_bin_yaw).astype(np.int64)
    seen = set()
    k = 0
    n = 0
    bound = float(cfg.n_min)
    for i in range(cfg.n_max):
        key = (keys_x[i], keys_y[i], keys_t[i])
        if key not in seen:
            seen.add(key)
            k += 1
            bound = _kld_bound(k, cfg)
        n += 1
        if n >= cfg.n_min and n >= bound:
            break
    return int(min(max(n, cfg.n_min), cfg.n_max))


def systematic_resample(weights, m: int, rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling: m children from one uniform draw."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    positions = (rng.random() + np.arange(m)) / m
    cumulative = np.cumsum(w)
    cumulative[-1] = 1.0
    idx = np.searchsorted(cumulative, positions, side="left")
    return np.minimum(idx, len(w) - 1)


def resample(pset: ParticleSet, cfg: FilterConfig,
             rng: np.random.Generator) -> ParticleSet:
    """Resample when the effective sample size falls below the threshold.

    Degenerate all-zero weights reset to uniform with a warning.  The child
    count comes from :func:`kld_target_count`, so the set can grow or shrink
    within [n_min, n_max]; children get uniform weights.
    """
    w = pset.weights
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        logger.warning("degenerate particle weights; resetting to uniform")
        w = np.full(pset.n, 1.0 / pset.n)
        pset = ParticleSet(pset.poses, w, alpha=pset.alpha,
                           n_eff=float(pset.n))
    n_eff = effective_sample_size(pset.weights)
    if n_eff >= cfg.ess_threshold * pset.n:
        return ParticleSet(pset.poses, pset.weights / pset.weights.sum(),
                           alpha=pset.alpha, n_eff=n_eff)
    m = kld_target_count(pset.poses, pset.weights, cfg, rng)
    idx = systematic_resample(pset.weights, m, rng)
    children = pset.poses[idx].copy()
    return ParticleSet(children, np.full(m, 1.0 / m), alpha=pset.alpha,
                       n_eff=float(m))


def estimate_pose(pset: ParticleSet, cfg: FilterConfig) -> Pose2D:
    """Weighted mean position with circular-mean yaw.

    When the yaw distribution is too dispersed (circular variance above the
    threshold) the estimate falls back to the maximum-weight particle, which
    is better behaved under multi-modal yaw.
    """
    w = pset.weights / pset.weights.sum()
    mx = float(w @ pset.poses[:, 0])
    my = float(w @ pset.poses[:, 1])
    c = float(w @ np.cos(pset.poses[:, 2]))
    s = float(w @ np.sin(pset.poses[:, 2]))
    resultant = math.hypot(c, s)
    if 1.0 - resultant > cfg.map_circvar_threshold:
        best = int(np.argmax(pset.weights))
        x, y, yaw = pset.poses[best]
        return Pose2D(float(x), float(y), float(yaw))
    return Pose2D(mx, my, math.atan2(s, c))


def _smooth_pose(prev: Pose2D, raw: Pose2D, beta: float) -> Pose2D:
    """Exponential smoothing: keep ``beta`` of the previous estimate."""
    x = beta * prev.x + (1.0 - beta) * raw.x
    y = beta * prev.y + (1.0 - beta) * raw.y
    yaw = wrap_angle(prev.yaw + (1.0 - beta) * wrap_angle(raw.yaw - prev.yaw))
    return Pose2D(x, y, yaw)


@dataclass
class StepResult:
    estimate: Pose2D
    raw_estimate: Pose2D
    n_particles: int
    alpha: float
    n_eff: float
    breakdown: LikelihoodBreakdown | None = None


class SemanticParticleFilter:
    """Stateful wrapper running the predict/update/estimate cycle.

    Odometry is integrated on every frame; the measurement update runs on
    every ``frame_stride``-th frame.  The filter can localise against a
    degraded map while the frames come from the full world.
    """

    def __init__(self, wall_map: WallMap, cfg: FilterConfig,
                 rng: np.random.Generator):
        self.wall_map = wall_map
        self.cfg = cfg
        self.rng = rng
        self.pset: ParticleSet | None = None
        self._frame_idx = 0
        self._smoothed: Pose2D | None = None

    def initialize(self, gnss0=None) -> None:
        self.pset = init_particles(self.wall_map, self.cfg, self.rng, gnss0)
        self._frame_idx = 0
        self._smoothed = None

    def _measurement_update(self, frame) -> LikelihoodBreakdown:
        cfg = self.cfg
        pset = self.pset
        r, phi, klass = frame.ray_arrays()
        sem_raw, n_used, n_sem = ray_log_scores(
            pset.poses, r, phi, klass, self.wall_map, cfg)
        if frame.gnss is not None:
            gnss_raw = _gnss_scores(pset.poses, frame.gnss, cfg.sigma_gnss)
        else:
            gnss_raw = np.zeros(pset.n)
        corridor_raw = _corridor_scores(pset.poses, self.wall_map, cfg)

        sem_norm = robust_normalize(sem_raw, cfg.clip_c)
        gnss_norm = robust_normalize(gnss_raw, cfg.clip_c)
        corridor_norm = robust_normalize(corridor_raw, cfg.clip_c)

        if frame.gnss is None:
            alpha = 0.0
        elif cfg.alpha_fixed is not None:
            alpha = cfg.alpha_fixed
        else:
            alpha = adaptive_alpha(n_sem, cfg)
        fused = fuse_scores(gnss_norm, sem_norm, corridor_norm, alpha,
                            cfg.lambda_corridor)
        weights = softmax_weights(fused, cfg.temperature)
        pset.weights = weights
        pset.alpha = alpha
        pset.n_eff = effective_sample_size(weights)
        self.pset = resample(pset, cfg, self.rng)
        return LikelihoodBreakdown(
            sem_raw=sem_raw, gnss_raw=gnss_raw, corridor_raw=corridor_raw,
            sem_norm=sem_norm, gnss_norm=gnss_norm, corridor_norm=corridor_norm,
            fused=fused, alpha=alpha, n_semantic=n_sem, n_rays_used=n_used)

    def step(self, frame, collect_breakdown: bool = False) -> StepResult:
        if self.pset is None:
            raise RuntimeError("call initialize() before step()")
        cfg = self.cfg
        self.pset = predict(self.pset, frame.odom[0], frame.odom[1], cfg, self.rng)
        breakdown = None
        if self._frame_idx % cfg.frame_stride == 0:
            breakdown = self._measurement_update(frame)
        raw = estimate_pose(self.pset, cfg)
        if cfg.smoothing_beta > 0.0 and self._smoothed is not None:
            est = _smooth_pose(self._smoothed, raw, cfg.smoothing_beta)
        else:
            est = raw
        self._smoothed = est
        self._frame_idx += 1
        return StepResult(
            estimate=est, raw_estimate=raw, n_particles=self.pset.n,
            alpha=self.pset.alpha, n_eff=self.pset.n_eff,
            breakdown=breakdown if collect_breakdown else None)

    def particle_corridors(self):
        """Corridor id of every particle (evaluation and recovery probes)."""
        from .semantic_map import corridor_index
        return corridor_index(self.wall_map, self.pset.poses[:, :2])


@dataclass
class FilterRun:
    """Per-frame outputs of a complete filter pass."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yaw: np.ndarray
    alpha: np.ndarray
    n_eff: np.ndarray
    n_particles: np.ndarray
    breakdowns: list | None = field(default=None, repr=False)

    def trajectory(self):
        from .metrics import Trajectory
        return Trajectory(self.t, np.column_stack([self.x, self.y]), self.yaw)


def run_filter(frames, wall_map: WallMap, cfg: FilterConfig, seed: int,
               collect_breakdowns: bool = False) -> FilterRun:
    """Run the filter over a frame sequence with a fixed seed."""
    if not frames:
        raise ValueError("no frames to filter")
    rng = np.random.default_rng(seed)
    pf = SemanticParticleFilter(wall_map, cfg, rng)
    pf.initialize(frames[0].gnss if cfg.use_gnss_init else None)
    rows = []
    breakdowns = [] if collect_breakdowns else None
    for frame in frames:
        res = pf.step(frame, collect_breakdown=collect_breakdowns)
        rows.append((frame.t, res.estimate.x, res.estimate.y, res.estimate.yaw,
                     res.alpha, res.n_eff, res.n_particles))
        if collect_breakdowns:
            breakdowns.append(res.breakdown)
    arr = np.array(rows, dtype=float)
    return FilterRun(t=arr[:, 0], x=arr[:, 1], y=arr[:, 2], yaw=arr[:, 3],
                     alpha=arr[:, 4], n_eff=arr[:, 5],
                     n_particles=arr[:, 6].astype(int),
                     breakdowns=breakdowns)


def write_estimates_csv(run: FilterRun, path) -> None:
    """Per-frame estimate log: t,est_x,est_y,est_yaw,alpha,n_eff,n_particles."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("t,est_x,est_y,est_yaw,alpha,n_eff,n_particles\n")
        for i in range(len(run.t)):
            fh.write(f"{run.t[i]!r},{run.x[i]!r},{run.y[i]!r},{run.yaw[i]!r},"
                     f"{run.alpha[i]!r},{run.n_eff[i]!r},{int(run.n_particles[i])}\n")
