"""Localisation for row-structured fields.

The package bundles a planar geometry core, semantic wall maps built from
pole/trunk landmarks, a deterministic vineyard simulator, a particle filter
fusing semantic rays with GNSS and a corridor prior, and an evaluation
harness with the published ablation set.
"""

from .geometry import Pose2D, Ray, Segment, point_segment_distance, \
    ray_segment_intersect, wrap_angle
from .semantic_map import (BACKGROUND, NO_HIT, POLE, TRUNK, Landmark, MapError,
                           WallMap, WallSegment, build_walls, cast_semantic_ray,
                           corridor_index, load_map, nearest_wall, save_map)
from .frames import LabeledRay, SensorFrame, read_frames, write_frames
from .simulate import (GnssNoiseConfig, SimConfig, VineyardSpec, degrade_gnss,
                       generate_trajectory, generate_vineyard, simulate_frame,
                       simulate_stream)
from .particle_filter import (FilterConfig, FilterRun, ParticleSet,
                              SemanticParticleFilter, adaptive_alpha,
                              effective_sample_size, estimate_pose, fuse_scores,
                              init_particles, predict, resample,
                              robust_normalize, run_filter, softmax_weights,
                              systematic_resample)
from .metrics import (InsufficientDataError, MetricsReport, Trajectory,
                      aggregate, ape, compute_report, cross_track, row_metrics,
                      rpe)
from .experiments import (ExperimentConfig, ablation_variants, apply_map_remove,
                          run_experiment, variant_config, wrong_row_recovery)

__version__ = "0.1.0"
