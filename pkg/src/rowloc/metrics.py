"""Trajectory evaluation: APE, RPE, cross-track and row-consistency metrics.

Estimates and ground truth are associated by nearest timestamp before any
metric is computed; unmatched samples are dropped and counted.  The aligned
APE uses the closed-form planar rigid registration (rotation from the
cross-covariance angle, no scale).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .geometry import wrap_angle_array
from .semantic_map import WallMap, corridor_index


class InsufficientDataError(ValueError):
    """Raised when a metric has fewer matched samples than it needs."""


@dataclass
class Trajectory:
    """Timestamped planar poses; timestamps must increase strictly."""

    t: np.ndarray
    xy: np.ndarray
    yaw: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.xy = np.asarray(self.xy, dtype=float)
        self.yaw = np.asarray(self.yaw, dtype=float)
        if self.xy.shape != (len(self.t), 2) or self.yaw.shape != (len(self.t),):
            raise ValueError("inconsistent trajectory array shapes")
        if len(self.t) >= 2 and not np.all(np.diff(self.t) > 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_poses(cls, ts, poses) -> "Trajectory":
        xy = np.array([[p.x, p.y] for p in poses])
        yaw = np.array([p.yaw for p in poses])
        return cls(np.asarray(ts, dtype=float), xy, yaw)

    def save_csv(self, path) -> None:
        path = Path(path)
        with path.open("w") as fh:
            fh.write("t,x,y,yaw\n")
            for i in range(len(self)):
                fh.write(f"{self.t[i]!r},{self.xy[i, 0]!r},{self.xy[i, 1]!r},"
                         f"{self.yaw[i]!r}\n")

    @classmethod
    def load_csv(cls, path) -> "Trajectory":
        """Read ``t,x,y,yaw`` files; filter estimate logs (``est_*``) also work."""
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().strip().split(",")
            cols = {name: i for i, name in enumerate(header)}
            if "x" in cols:
                ix, iy, iyaw = cols["x"], cols["y"], cols["yaw"]
            elif "est_x" in cols:
                ix, iy, iyaw = cols["est_x"], cols["est_y"], cols["est_yaw"]
            else:
                raise ValueError(f"{path}: unrecognised trajectory header {header}")
            it = cols["t"]
            rows = [line.strip().split(",") for line in fh if line.strip()]
        t = np.array([float(r[it]) for r in rows])
        xy = np.array([[float(r[ix]), float(r[iy])] for r in rows])
        yaw = np.array([float(r[iyaw]) for r in rows])
        return cls(t, xy, yaw)


def associate(est: Trajectory, gt: Trajectory):
    """Match estimate samples to the nearest ground-truth timestamp.

    The admissible gap is half the median ground-truth sample interval.
    Returns (est_idx, gt_idx, n_dropped).
    """
    if len(gt) < 2 or len(est) < 1:
        raise InsufficientDataError("need at least two ground-truth samples")
    dt = float(np.median(np.diff(gt.t)))
    pos = np.searchsorted(gt.t, est.t)
    pos = np.clip(pos, 1, len(gt.t) - 1)
    left = pos - 1
    choose_left = np.abs(gt.t[left] - est.t) <= np.abs(gt.t[pos] - est.t)
    nearest = np.where(choose_left, left, pos)
    ok = np.abs(gt.t[nearest] - est.t) <= dt / 2.0 + 1e-12
    est_idx = np.flatnonzero(ok)
    gt_idx = nearest[ok]
    return est_idx, gt_idx, int(len(est.t) - len(est_idx))


def align_se2(p: np.ndarray, q: np.ndarray):
    """Closed-form rigid transform (R, t) minimising sum ||R p + t - q||^2."""
    pc = p - p.mean(axis=0)
    qc = q - q.mean(axis=0)
    s = float(np.sum(pc[:, 0] * qc[:, 1] - pc[:, 1] * qc[:, 0]))
    c = float(np.sum(pc[:, 0] * qc[:, 0] + pc[:, 1] * qc[:, 1]))
    phi = math.atan2(s, c)
    rot = np.array([[math.cos(phi), -math.sin(phi)],
                    [math.sin(phi), math.cos(phi)]])
    trans = q.mean(axis=0) - rot @ p.mean(axis=0)
    return rot, trans, phi


def _error_stats(err: np.ndarray) -> dict:
    return {
        "rmse": float(np.sqrt(np.mean(err ** 2))),
        "mean": float(np.mean(err)),
        "median": float(np.median(err)),
        "max": float(np.max(err)),
    }


def ape(est: Trajectory, gt: Trajectory, aligned: bool = False) -> dict:
    """Absolute position error statistics over matched samples.

    With ``aligned=True`` the estimate is first registered onto the ground
    truth with the closed-form planar rigid transform, which can only lower
    the error.
    """
    ei, gi, dropped = associate(est, gt)
    if len(ei) < 2:
        raise InsufficientDataError("APE needs at least two matched pairs")
    p = est.xy[ei]
    q = gt.xy[gi]
    if aligned:
        rot, trans, _ = align_se2(p, q)
        p = p @ rot.T + trans
    err = np.linalg.norm(p - q, axis=1)
    stats = _error_stats(err)
    stats["n_matched"] = int(len(ei))
    stats["n_dropped"] = dropped
    return stats


def _relative_translation(xy: np.ndarray, yaw: np.ndarray, i: np.ndarray,
                          j: np.ndarray) -> np.ndarray:
    """Body-frame translation of pose j seen from pose i."""
    d = xy[j] - xy[i]
    c = np.cos(-yaw[i])
    s = np.sin(-yaw[i])
    return np.column_stack([c * d[:, 0] - s * d[:, 1],
                            s * d[:, 0] + c * d[:, 1]])


def rpe(est: Trajectory, gt: Trajectory, delta: float) -> dict:
    """Relative position error over segments of ``delta`` metres travelled.

    For each matched sample the end sample is the first one whose ground
    truth travelled distance exceeds ``delta``; the error is the difference
    of the body-frame relative translations.  Invariant to global rigid
    transforms of either trajectory.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    ei, gi, dropped = associate(est, gt)
    if len(ei) < 2:
        raise InsufficientDataError("RPE needs at least two matched pairs")
    exy, eyaw = est.xy[ei], est.yaw[ei]
    gxy, gyaw = gt.xy[gi], gt.yaw[gi]
    seg = np.linalg.norm(np.diff(gxy, axis=0), axis=1)
    dist = np.concatenate([[0.0], np.cumsum(seg)])
    ends = np.searchsorted(dist, dist + delta, side="right")
    starts = np.flatnonzero(ends < len(dist))
    if starts.size == 0:
        raise InsufficientDataError(
            f"no ground-truth segment reaches {delta} m of travel")
    ends = ends[starts]
    rel_est = _relative_translation(exy, eyaw, starts, ends)
    rel_gt = _relative_translation(gxy, gyaw, starts, ends)
    err = np.linalg.norm(rel_est - rel_gt, axis=1)
    stats = _error_stats(err)
    stats["n_segments"] = int(len(err))
    stats["n_dropped"] = dropped
    return stats


def cross_track(est: Trajectory, gt: Trajectory) -> dict:
    """Lateral error: component of (est - gt) across the ground-truth heading."""
    ei, gi, dropped = associate(est, gt)
    if len(ei) < 1:
        raise InsufficientDataError("cross-track needs at least one matched pair")
    d = est.xy[ei] - gt.xy[gi]
    yaw = gt.yaw[gi]
    lateral = -np.sin(yaw) * d[:, 0] + np.cos(yaw) * d[:, 1]
    mag = np.abs(lateral)
    return {
        "mean": float(np.mean(mag)),
        "median": float(np.median(mag)),
        "max": float(np.max(mag)),
        "n_matched": int(len(ei)),
        "n_dropped": dropped,
    }


def row_metrics(est: Trajectory, gt: Trajectory, wall_map: WallMap) -> dict:
    """Corridor agreement between estimate and ground truth.

    The fraction counts frames whose estimated corridor matches the ground
    truth one, over frames where both lie inside a corridor (headland frames
    are excluded).  Mislocalisation events are transitions from correct to
    incorrect; a run that starts incorrect counts as one event.
    """
    ei, gi, _ = associate(est, gt)
    est_c = corridor_index(wall_map, est.xy[ei])
    gt_c = corridor_index(wall_map, gt.xy[gi])
    both = (est_c >= 0) & (gt_c >= 0)
    n_eval = int(both.sum())
    if n_eval == 0:
        return {"fraction": float("nan"), "events": 0, "n_eval": 0}
    correct = est_c[both] == gt_c[both]
    events = 0
    prev = True
    for cur in correct:
        if prev and not cur:
            events += 1
        prev = bool(cur)
    return {"fraction": float(correct.mean()), "events": events, "n_eval": n_eval}


@dataclass
class MetricsReport:
    """Flat metric record for one (method, experiment, seed) run."""

    method: str
    experiment: str
    seed: int
    ape_raw: float
    ape_aligned: float
    rpe_2m: float
    rpe_5m: float
    xt_mean: float
    xt_median: float
    xt_max: float
    row_fraction: float
    misloc_events: float
    n_matched: int
    n_dropped: int

    NUMERIC_FIELDS = ("ape_raw", "ape_aligned", "rpe_2m", "rpe_5m", "xt_mean",
                      "xt_median", "xt_max", "row_fraction", "misloc_events")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def compute_report(est: Trajectory, gt: Trajectory, wall_map: WallMap,
                   method: str, experiment: str, seed: int) -> MetricsReport:
    """Evaluate every supported metric for one run."""
    ape_raw = ape(est, gt, aligned=False)
    ape_al = ape(est, gt, aligned=True)
    rpe2 = rpe(est, gt, 2.0)
    rpe5 = rpe(est, gt, 5.0)
    xt = cross_track(est, gt)
    rows = row_metrics(est, gt, wall_map)
    return MetricsReport(
        method=method, experiment=experiment, seed=seed,
        ape_raw=ape_raw["rmse"], ape_aligned=ape_al["rmse"],
        rpe_2m=rpe2["rmse"], rpe_5m=rpe5["rmse"],
        xt_mean=xt["mean"], xt_median=xt["median"], xt_max=xt["max"],
        row_fraction=rows["fraction"], misloc_events=float(rows["events"]),
        n_matched=ape_raw["n_matched"], n_dropped=ape_raw["n_dropped"])


def aggregate(reports) -> dict:
    """Per-metric mean and population standard deviation across runs."""
    reports = list(reports)
    if not reports:
        raise InsufficientDataError("nothing to aggregate")
    out = {}
    for name in MetricsReport.NUMERIC_FIELDS:
        values = np.array([getattr(r, name) for r in reports], dtype=float)
        out[name] = (float(values.mean()), float(values.std()))
    return out
