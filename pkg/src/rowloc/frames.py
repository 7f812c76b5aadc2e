"""Sensor frame records exchanged between the simulator and the filter.

Frames serialise to JSON lines so logs stay diffable and replayable; floats
are written with repr semantics and round-trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Pose2D
from .semantic_map import BACKGROUND, POLE, TRUNK


@dataclass(frozen=True)
class LabeledRay:
    """One range/bearing return with a semantic class label.

    ``r`` is the measured range in metres (0 < r <= r_max), ``phi`` the
    bearing in the sensor frame, and ``klass`` one of POLE, TRUNK or
    BACKGROUND.
    """

    r: float
    phi: float
    klass: int

    def __post_init__(self):
        if self.klass not in (POLE, TRUNK, BACKGROUND):
            raise ValueError(f"unknown ray class {self.klass}")
        if not self.r > 0.0:
            raise ValueError(f"ray range must be positive, got {self.r}")


@dataclass
class SensorFrame:
    """All observations for one time step.

    ``odom`` is the (delta_distance, delta_yaw) increment since the previous
    frame, ``gnss`` a degraded position fix or None when unavailable, and
    ``gt_pose`` the simulator ground truth kept for evaluation only.
    """

    t: float
    odom: tuple[float, float]
    rays: list[LabeledRay]
    gnss: tuple[float, float] | None
    gt_pose: Pose2D
    _packed: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def z_pole(self) -> list[LabeledRay]:
        return [ray for ray in self.rays if ray.klass == POLE]

    @property
    def z_trunk(self) -> list[LabeledRay]:
        return [ray for ray in self.rays if ray.klass == TRUNK]

    @property
    def z_background(self) -> list[LabeledRay]:
        return [ray for ray in self.rays if ray.klass == BACKGROUND]

    @property
    def n_semantic(self) -> int:
        return sum(1 for ray in self.rays if ray.klass != BACKGROUND)

    def ray_arrays(self):
        """Rays packed as (r, phi, klass) float/int arrays, cached."""
        if self._packed is None:
            r = np.array([ray.r for ray in self.rays], dtype=float)
            phi = np.array([ray.phi for ray in self.rays], dtype=float)
            klass = np.array([ray.klass for ray in self.rays], dtype=np.int64)
            self._packed = (r, phi, klass)
        return self._packed


def _frame_to_obj(frame: SensorFrame) -> dict:
    return {
        "t": frame.t,
        "odom": [frame.odom[0], frame.odom[1]],
        "gnss": None if frame.gnss is None else [frame.gnss[0], frame.gnss[1]],
        "gt": [frame.gt_pose.x, frame.gt_pose.y, frame.gt_pose.yaw],
        "rays": [[ray.r, ray.phi, ray.klass] for ray in frame.rays],
    }


def _frame_from_obj(obj: dict) -> SensorFrame:
    gnss = obj["gnss"]
    return SensorFrame(
        t=float(obj["t"]),
        odom=(float(obj["odom"][0]), float(obj["odom"][1])),
        rays=[LabeledRay(float(r), float(phi), int(klass))
              for r, phi, klass in obj["rays"]],
        gnss=None if gnss is None else (float(gnss[0]), float(gnss[1])),
        gt_pose=Pose2D(*obj["gt"]),
    )


def write_frames(frames, path) -> None:
    """Write frames as one JSON object per line."""
    path = Path(path)
    with path.open("w") as fh:
        for frame in frames:
            fh.write(json.dumps(_frame_to_obj(frame)))
            fh.write("\n")


def read_frames(path) -> list[SensorFrame]:
    """Read a JSON-lines frame record written by :func:`write_frames`."""
    path = Path(path)
    frames = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                frames.append(_frame_from_obj(json.loads(line)))
    return frames
